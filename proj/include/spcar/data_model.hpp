#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spcar {

/// Facility-level covariates in file order.
inline constexpr std::array<std::string_view, 6> kFacilityCovariates = {
    "pct_diabetes_primary", "pct_hypertension_primary", "pct_african_american",
    "staff_count",          "pct_septicemia",           "pct_female",
};

inline constexpr std::string_view kFplScore = "fpl_score";

inline constexpr std::array<std::string_view, 11> kFacilityColumns = {
    "facility_id",    "zcta_id",     "latitude",   "longitude", "pct_diabetes_primary", "pct_hypertension_primary",
    "pct_african_american", "staff_count", "pct_septicemia", "pct_female", "shr",
};

inline constexpr std::array<std::string_view, 5> kZctaColumns = {
    "zcta_id", "centroid_latitude", "centroid_longitude", "population", "fpl_score",
};

using OptionalValue = std::optional<double>;

struct FacilityRecord {
    std::string facility_id;
    std::string zcta_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::vector<OptionalValue> covariates;  // aligned with kFacilityCovariates
    OptionalValue shr;

    std::size_t missing_covariates() const;
    bool operator==(const FacilityRecord&) const = default;
};

struct ZctaRecord {
    std::string zcta_id;
    double centroid_latitude = 0.0;
    double centroid_longitude = 0.0;
    long population = 1;
    OptionalValue fpl_score;

    bool operator==(const ZctaRecord&) const = default;
};

struct Dataset {
    std::vector<FacilityRecord> facilities;
    std::vector<ZctaRecord> zctas;
    std::vector<std::string> covariate_names = default_covariate_names();

    static std::vector<std::string> default_covariate_names();
    bool operator==(const Dataset&) const = default;
};

// Throws ValidationError naming the row (1-based data row) and field.
void validate_facility(const FacilityRecord& rec, std::size_t row);
void validate_zcta(const ZctaRecord& rec, std::size_t row);

/// Checks record invariants plus cross-table references.
void validate_dataset(const Dataset& ds);

std::vector<FacilityRecord> load_facility_table(const std::filesystem::path& path);
std::vector<ZctaRecord> load_zcta_table(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& facilities, const std::filesystem::path& zctas);

void write_facility_table(const std::filesystem::path& path, const std::vector<FacilityRecord>& facilities);
void write_zcta_table(const std::filesystem::path& path, const std::vector<ZctaRecord>& zctas);

struct ScreenResult {
    Dataset dataset;
    std::size_t kept = 0;
    std::size_t removed = 0;
    bool empty_warning = false;
};

/// Drops facilities whose fraction of missing facility-level covariates
/// strictly exceeds `threshold`. SHR and the ZCTA score are not counted.
ScreenResult screen_missingness(const Dataset& ds, double threshold);

/// One facility joined with its ZCTA. `covariates` holds the six facility
/// covariates followed by the broadcast fpl_score.
struct DesignRow {
    std::string facility_id;
    std::string zcta_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::vector<OptionalValue> covariates;
    double offset = 0.0;  // log(population)
    OptionalValue shr;
};

struct DesignTable {
    std::vector<std::string> variable_names;  // facility covariates + fpl_score
    std::vector<DesignRow> rows;

    /// Index of `name` in variable_names; throws ValidationError if unknown.
    std::size_t variable_index(std::string_view name) const;
    std::size_t missing_cells() const;
};

/// Broadcasts fpl_score and the log-population offset onto each facility.
/// Preserves facility count and order. Throws JoinError listing every
/// facility whose zcta_id is unknown.
DesignTable join_zcta(const Dataset& ds);

}  // namespace spcar
