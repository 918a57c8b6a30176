#include "spcar/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "spcar/csv.hpp"
#include "spcar/error.hpp"

namespace spcar {

namespace {

std::vector<std::string> to_strings(auto const& views) {
    return {views.begin(), views.end()};
}

bool is_percentage(std::size_t covariate) { return kFacilityCovariates[covariate] != "staff_count"; }

[[noreturn]] void invalid(std::string_view table, std::size_t row, std::string_view field, std::string_view what) {
    throw ValidationError(fmt::format("{} row {} field {}: {}", table, row, field, what));
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

}  // namespace

std::size_t FacilityRecord::missing_covariates() const {
    return static_cast<std::size_t>(std::count_if(covariates.begin(), covariates.end(),
                                                  [](const OptionalValue& v) { return !v.has_value(); }));
}

std::vector<std::string> Dataset::default_covariate_names() { return to_strings(kFacilityCovariates); }

void validate_facility(const FacilityRecord& rec, std::size_t row) {
    constexpr std::string_view table = "facilities";
    if (rec.facility_id.empty()) invalid(table, row, "facility_id", "empty id");
    if (rec.zcta_id.empty()) invalid(table, row, "zcta_id", "empty id");
    if (!(rec.latitude >= -90.0 && rec.latitude <= 90.0)) invalid(table, row, "latitude", "latitude out of range");
    if (!(rec.longitude >= -180.0 && rec.longitude <= 180.0))
        invalid(table, row, "longitude", "longitude out of range");
    if (rec.covariates.size() != kFacilityCovariates.size())
        invalid(table, row, "covariates", fmt::format("expected {} covariates", kFacilityCovariates.size()));
    for (std::size_t c = 0; c < rec.covariates.size(); ++c) {
        if (!rec.covariates[c]) continue;
        double v = *rec.covariates[c];
        if (!std::isfinite(v)) invalid(table, row, kFacilityCovariates[c], "non-finite value");
        if (is_percentage(c) && (v < 0.0 || v > 100.0))
            invalid(table, row, kFacilityCovariates[c], "percentage out of range [0, 100]");
        if (!is_percentage(c) && v < 0.0) invalid(table, row, kFacilityCovariates[c], "negative count");
    }
    if (rec.shr && !(*rec.shr > 0.0 && std::isfinite(*rec.shr))) invalid(table, row, "shr", "shr must be positive");
}

void validate_zcta(const ZctaRecord& rec, std::size_t row) {
    constexpr std::string_view table = "zctas";
    if (rec.zcta_id.empty()) invalid(table, row, "zcta_id", "empty id");
    if (!(rec.centroid_latitude >= -90.0 && rec.centroid_latitude <= 90.0))
        invalid(table, row, "centroid_latitude", "latitude out of range");
    if (!(rec.centroid_longitude >= -180.0 && rec.centroid_longitude <= 180.0))
        invalid(table, row, "centroid_longitude", "longitude out of range");
    if (rec.population < 1) invalid(table, row, "population", "population must be >= 1");
    if (rec.fpl_score && !(*rec.fpl_score >= 0.0 && std::isfinite(*rec.fpl_score)))
        invalid(table, row, "fpl_score", "fpl_score must be >= 0");
}

void validate_dataset(const Dataset& ds) {
    if (ds.covariate_names.size() != kFacilityCovariates.size())
        throw ValidationError("covariate_names must list the six facility covariates");
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < ds.zctas.size(); ++i) {
        validate_zcta(ds.zctas[i], i + 1);
        if (!ids.insert(ds.zctas[i].zcta_id).second)
            invalid("zctas", i + 1, "zcta_id", "duplicate id " + ds.zctas[i].zcta_id);
    }
    for (std::size_t i = 0; i < ds.facilities.size(); ++i) {
        validate_facility(ds.facilities[i], i + 1);
        if (!ids.contains(ds.facilities[i].zcta_id))
            invalid("facilities", i + 1, "zcta_id", "unknown zcta " + ds.facilities[i].zcta_id);
    }
}

std::vector<FacilityRecord> load_facility_table(const std::filesystem::path& path) {
    auto table = csv::read_file(path, to_strings(kFacilityColumns));
    std::vector<FacilityRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        long line = table.line_numbers[r];
        FacilityRecord rec;
        rec.facility_id = f[0];
        rec.zcta_id = f[1];
        rec.latitude = csv::parse_real(f[2], line, "latitude");
        rec.longitude = csv::parse_real(f[3], line, "longitude");
        for (std::size_t c = 0; c < kFacilityCovariates.size(); ++c)
            rec.covariates.push_back(csv::parse_optional_real(f[4 + c], line, kFacilityCovariates[c]));
        rec.shr = csv::parse_optional_real(f[10], line, "shr");
        validate_facility(rec, r + 1);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ZctaRecord> load_zcta_table(const std::filesystem::path& path) {
    auto table = csv::read_file(path, to_strings(kZctaColumns));
    std::vector<ZctaRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        long line = table.line_numbers[r];
        ZctaRecord rec;
        rec.zcta_id = f[0];
        rec.centroid_latitude = csv::parse_real(f[1], line, "centroid_latitude");
        rec.centroid_longitude = csv::parse_real(f[2], line, "centroid_longitude");
        double pop = csv::parse_real(f[3], line, "population");
        if (pop != std::floor(pop)) throw ParseError("population must be an integer", line);
        rec.population = static_cast<long>(pop);
        rec.fpl_score = csv::parse_optional_real(f[4], line, "fpl_score");
        validate_zcta(rec, r + 1);
        out.push_back(std::move(rec));
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& facilities, const std::filesystem::path& zctas) {
    Dataset ds;
    ds.facilities = load_facility_table(facilities);
    ds.zctas = load_zcta_table(zctas);
    validate_dataset(ds);
    return ds;
}

void write_facility_table(const std::filesystem::path& path, const std::vector<FacilityRecord>& facilities) {
    auto out = open_for_write(path);
    out << fmt::format("{}\n", fmt::join(kFacilityColumns, ","));
    for (const auto& rec : facilities) {
        out << rec.facility_id << ',' << rec.zcta_id << ',' << csv::format_real(rec.latitude) << ','
            << csv::format_real(rec.longitude);
        for (const auto& c : rec.covariates) out << ',' << csv::format_optional(c);
        out << ',' << csv::format_optional(rec.shr) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_zcta_table(const std::filesystem::path& path, const std::vector<ZctaRecord>& zctas) {
    auto out = open_for_write(path);
    out << fmt::format("{}\n", fmt::join(kZctaColumns, ","));
    for (const auto& rec : zctas) {
        out << rec.zcta_id << ',' << csv::format_real(rec.centroid_latitude) << ','
            << csv::format_real(rec.centroid_longitude) << ',' << rec.population << ','
            << csv::format_optional(rec.fpl_score) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

ScreenResult screen_missingness(const Dataset& ds, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("threshold must lie in [0, 1]");
    ScreenResult result;
    result.dataset.zctas = ds.zctas;
    result.dataset.covariate_names = ds.covariate_names;
    for (const auto& rec : ds.facilities) {
        double fraction = rec.covariates.empty()
                              ? 0.0
                              : static_cast<double>(rec.missing_covariates()) / static_cast<double>(rec.covariates.size());
        if (fraction > threshold) {
            ++result.removed;
        } else {
            result.dataset.facilities.push_back(rec);
            ++result.kept;
        }
    }
    result.empty_warning = result.kept == 0;
    return result;
}

std::size_t DesignTable::variable_index(std::string_view name) const {
    auto it = std::find(variable_names.begin(), variable_names.end(), name);
    if (it == variable_names.end()) throw ValidationError(fmt::format("unknown variable '{}'", name));
    return static_cast<std::size_t>(it - variable_names.begin());
}

std::size_t DesignTable::missing_cells() const {
    std::size_t n = 0;
    for (const auto& row : rows)
        n += static_cast<std::size_t>(
            std::count_if(row.covariates.begin(), row.covariates.end(), [](const OptionalValue& v) { return !v; }));
    return n;
}

DesignTable join_zcta(const Dataset& ds) {
    std::unordered_map<std::string_view, const ZctaRecord*> by_id;
    for (const auto& z : ds.zctas) by_id.emplace(z.zcta_id, &z);

    std::vector<std::string> unresolved;
    for (const auto& f : ds.facilities)
        if (!by_id.contains(f.zcta_id)) unresolved.push_back(f.facility_id);
    if (!unresolved.empty())
        throw JoinError(fmt::format("facilities with unknown zcta_id: {}", fmt::join(unresolved, ", ")));

    DesignTable out;
    out.variable_names = ds.covariate_names;
    out.variable_names.emplace_back(kFplScore);
    out.rows.reserve(ds.facilities.size());
    for (const auto& f : ds.facilities) {
        const ZctaRecord& z = *by_id.at(f.zcta_id);
        DesignRow row;
        row.facility_id = f.facility_id;
        row.zcta_id = f.zcta_id;
        row.latitude = f.latitude;
        row.longitude = f.longitude;
        row.covariates = f.covariates;
        row.covariates.push_back(z.fpl_score);
        row.offset = std::log(static_cast<double>(z.population));
        row.shr = f.shr;
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace spcar
