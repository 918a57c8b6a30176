#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "spcar/data_model.hpp"
#include "spcar/geo_order.hpp"
#include "spcar/zcta_graph.hpp"

namespace spcar {

/// Synthetic Florida-like dataset drawn from the two-level CAR model, with
/// covariates that vary smoothly with distance from the centroid.
struct SimulationOptions {
    std::size_t k = 50;                   // ZCTAs
    std::size_t max_facilities_per_zcta = 3;
    double covariate_missing_rate = 0.2404;  // applied to diabetes, hypertension, African American, female
    double shr_missing_rate = 0.0085;
    // intercept, six facility covariates, fpl_score
    std::vector<double> beta{-10.4, -0.0036, -0.0023, 0.0003, -0.0034, 0.0222, 0.0003, 0.0028};
    double rho = 0.5;
    double tau2 = 0.2;
    double nu2 = 0.05;
    double adjacency_km = 40.0;
    LatLon centroid = kFloridaCentroid;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SimulatedDataset {
    Dataset dataset;             // with missing cells applied
    Dataset complete;            // before masking
    std::vector<Edge> edges;     // raw adjacency (before island repair)
    Eigen::VectorXd phi;         // true spatial effects, zcta-table order
    std::vector<double> log_shr; // true responses, facility order
};

SimulatedDataset simulate_dataset(const SimulationOptions& options);

/// facilities.csv, zctas.csv, adjacency.csv, truth.json.
void write_simulation(const std::filesystem::path& dir, const SimulatedDataset& sim, const SimulationOptions& options);

}  // namespace spcar
