#include "spcar/report.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "spcar/csv.hpp"
#include "spcar/error.hpp"

namespace spcar {

double rse(std::span<const double> y, std::span<const double> y_hat, std::span<const std::size_t> zcta_index) {
    if (y.size() != y_hat.size() || y.size() != zcta_index.size()) throw ContractError("rse: length mismatch");
    std::unordered_map<std::size_t, std::pair<double, std::size_t>> groups;
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto& g = groups[zcta_index[i]];
        g.first += y[i];
        g.second += 1;
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        const auto& g = groups[zcta_index[i]];
        double mean = g.first / static_cast<double>(g.second);
        den += (y[i] - mean) * (y[i] - mean);
    }
    if (!(den > 0.0)) throw NumericalError("persistence baseline degenerate");
    return num / den;
}

std::vector<std::string> graph_node_ids(const DesignTable& table, std::span<const ZctaRecord> zctas) {
    std::unordered_set<std::string_view> used;
    for (const auto& row : table.rows) used.insert(row.zcta_id);
    std::vector<std::string> ids;
    for (const auto& z : zctas)
        if (used.contains(z.zcta_id)) ids.push_back(z.zcta_id);
    return ids;
}

CarModelInput make_car_input(const DesignTable& table, std::shared_ptr<const ZctaGraph> graph, bool standardize) {
    if (!graph) throw ContractError("make_car_input: graph required");
    std::unordered_map<std::string_view, std::size_t> node;
    for (std::size_t k = 0; k < graph->size(); ++k) node.emplace(graph->ids()[k], k);

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto p = static_cast<Eigen::Index>(table.variable_names.size());
    CarModelInput in;
    in.y = Eigen::VectorXd::Zero(n);
    in.X.resize(n, p + 1);
    in.offset.resize(n);
    in.coefficient_names.push_back("intercept");
    for (const auto& name : table.variable_names) in.coefficient_names.push_back(name);

    std::vector<std::string> missing_cells;
    for (Eigen::Index i = 0; i < n; ++i) {
        const DesignRow& row = table.rows[static_cast<std::size_t>(i)];
        in.X(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& v = row.covariates[static_cast<std::size_t>(j)];
            if (!v) {
                missing_cells.push_back(fmt::format("{}:{}", row.facility_id, table.variable_names[static_cast<std::size_t>(j)]));
                continue;
            }
            in.X(i, j + 1) = *v;
        }
        in.offset[i] = row.offset;
        in.missing.push_back(!row.shr.has_value());
        if (row.shr) in.y[i] = std::log(*row.shr);
        auto it = node.find(row.zcta_id);
        if (it == node.end()) throw ValidationError(fmt::format("facility {} has a zcta outside the graph", row.facility_id));
        in.zcta_index.push_back(it->second);
        in.row_ids.push_back(row.facility_id);
    }
    if (!missing_cells.empty()) {
        throw ValidationError(fmt::format("{} covariate cells are missing (run impute first): {}", missing_cells.size(),
                                          fmt::join(missing_cells, ", ")));
    }
    if (standardize && n > 1) {
        for (Eigen::Index j = 1; j <= p; ++j) {
            double mean = in.X.col(j).mean();
            double sd = std::sqrt((in.X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1));
            in.X.col(j).array() -= mean;
            if (sd > 0.0) in.X.col(j) /= sd;
        }
    }
    in.graph = std::move(graph);
    return in;
}

double observed_rse(const CarModelInput& input, const Eigen::VectorXd& fitted) {
    std::vector<double> y;
    std::vector<double> y_hat;
    std::vector<std::size_t> zcta;
    for (Eigen::Index i = 0; i < input.n(); ++i) {
        if (input.missing[static_cast<std::size_t>(i)]) continue;
        y.push_back(input.y[i]);
        y_hat.push_back(fitted[i]);
        zcta.push_back(input.zcta_index[static_cast<std::size_t>(i)]);
    }
    return rse(y, y_hat, zcta);
}

void write_fitted_csv(const std::filesystem::path& path, const CarModelInput& input, const Eigen::VectorXd& fitted,
                      std::span<const std::string> zcta_ids) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "facility_id,zcta_id,observed_log_shr,fitted_log_shr\n";
    for (Eigen::Index i = 0; i < input.n(); ++i) {
        const auto row = static_cast<std::size_t>(i);
        out << (input.row_ids.empty() ? fmt::format("row_{}", i) : input.row_ids[row]) << ','
            << zcta_ids[input.zcta_index[row]] << ','
            << (input.missing[row] ? std::string("NA") : csv::format_real(input.y[i])) << ','
            << csv::format_real(fitted[i]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void export_zcta_aggregates(const DesignTable& table, std::span<const ZctaRecord> zctas,
                            std::span<const double> fitted, const std::filesystem::path& path) {
    if (!fitted.empty() && fitted.size() != table.rows.size())
        throw ContractError("export: fitted values not aligned to rows");
    const std::vector<std::string> ids = graph_node_ids(table, zctas);
    std::unordered_map<std::string_view, std::size_t> slot;
    for (std::size_t k = 0; k < ids.size(); ++k) slot.emplace(ids[k], k);

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
        void add(double v) { sum += v; ++n; }
        std::string str() const { return n ? csv::format_real(sum / static_cast<double>(n)) : std::string("NA"); }
    };
    const std::size_t p = table.variable_names.size();
    std::vector<std::vector<Acc>> vars(ids.size(), std::vector<Acc>(p));
    std::vector<Acc> observed(ids.size());
    std::vector<Acc> fit(ids.size());
    std::vector<std::size_t> count(ids.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const DesignRow& row = table.rows[i];
        const std::size_t k = slot.at(row.zcta_id);
        ++count[k];
        for (std::size_t j = 0; j < p; ++j)
            if (row.covariates[j]) vars[k][j].add(*row.covariates[j]);
        if (row.shr) observed[k].add(std::log(*row.shr));
        if (!fitted.empty()) fit[k].add(fitted[i]);
    }

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "zcta_id,n_facilities";
    for (const auto& name : table.variable_names) out << ',' << name;
    out << ",observed_log_shr,fitted_log_shr\n";
    for (std::size_t k = 0; k < ids.size(); ++k) {
        out << ids[k] << ',' << count[k];
        for (std::size_t j = 0; j < p; ++j) out << ',' << vars[k][j].str();
        out << ',' << observed[k].str() << ',' << fit[k].str() << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spcar
