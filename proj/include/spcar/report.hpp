#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spcar/car_mcmc.hpp"
#include "spcar/data_model.hpp"
#include "spcar/zcta_graph.hpp"

namespace spcar {

/// Relative squared error against the within-ZCTA mean (persistence) model:
/// sum (y - y_hat)^2 / sum (y - ybar_k)^2. Rows of single-row ZCTAs add
/// nothing to the denominator; a zero denominator throws NumericalError.
double rse(std::span<const double> y, std::span<const double> y_hat, std::span<const std::size_t> zcta_index);

/// ZCTAs that host at least one facility, in zcta-table order.
std::vector<std::string> graph_node_ids(const DesignTable& table, std::span<const ZctaRecord> zctas);

/// Design for the CAR sampler: intercept plus every table variable, offset,
/// log(SHR) response with missing rows flagged. Throws ValidationError if
/// any covariate cell is missing. `standardize` centers and scales the
/// non-intercept columns.
CarModelInput make_car_input(const DesignTable& table, std::shared_ptr<const ZctaGraph> graph,
                             bool standardize = false);

/// RSE over the rows whose response was observed.
double observed_rse(const CarModelInput& input, const Eigen::VectorXd& fitted);

/// Writes fitted.csv: facility_id, zcta_id, observed_log_shr, fitted_log_shr.
void write_fitted_csv(const std::filesystem::path& path, const CarModelInput& input, const Eigen::VectorXd& fitted,
                      std::span<const std::string> zcta_ids);

/// Per-ZCTA means of every variable, observed log(SHR), and fitted log(SHR)
/// (NA when no value is available). One row per ZCTA hosting a facility.
/// `fitted` is aligned to table rows and may be empty.
void export_zcta_aggregates(const DesignTable& table, std::span<const ZctaRecord> zctas,
                            std::span<const double> fitted, const std::filesystem::path& path);

}  // namespace spcar
