#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "spcar/geo_order.hpp"

namespace spcar {

// Local-level model along distance:
//   x_i       = alpha_i + eps_i,          eps_i ~ N(0, sigma2_eps)
//   alpha_i+1 = alpha_i + eta_i,          eta_i ~ N(0, g_i * sigma2_eta)
// where g_i = d_{i+1} - d_i is the forward gap between consecutive sites.
struct LocalLevelParams {
    double sigma2_eps = 1.0;
    double sigma2_eta = 1.0;  // per km
    double init_mean = 0.0;
    double init_var = 1e7;

    void validate() const;
    bool operator==(const LocalLevelParams&) const = default;
};

struct Innovation {
    double v = 0.0;  // x_i - a_i
    double F = 0.0;  // P_i + sigma2_eps
    double K = 0.0;  // P_i / F_i
};

struct FilterStep {
    double predicted_mean = 0.0;  // a_i
    double predicted_var = 0.0;   // P_i
    std::optional<Innovation> innovation;  // set at observed steps only
};

struct FilterOutput {
    std::vector<FilterStep> steps;
    double log_likelihood = 0.0;
};

struct SmootherOutput {
    std::vector<double> mean;  // E[alpha_i | all observations]
    std::vector<double> var;   // Var[alpha_i | all observations]
};

FilterOutput kalman_filter(const OrderedSeries& series, const LocalLevelParams& params);

/// Log-likelihood only; same recursion as kalman_filter without storing steps.
double log_likelihood(const OrderedSeries& series, const LocalLevelParams& params);

SmootherOutput kalman_smoother(const FilterOutput& filter, const OrderedSeries& series);

struct MleOptions {
    int restarts = 5;
    int max_evaluations = 2000;       // per simplex run
    double size_tolerance = 1e-8;     // simplex size in log-variance space
    double variance_floor = 1e-12;
    double diffuse_scale = 1e7;       // init_var = diffuse_scale * sample variance
};

struct MleResult {
    LocalLevelParams params;
    double log_likelihood = 0.0;
    int evaluations = 0;
    bool converged = false;  // at least one simplex run met the size tolerance
    bool warning = false;    // no run improved on its starting point
};

/// Maximizes the filter log-likelihood over (log sigma2_eps, log sigma2_eta)
/// with Nelder-Mead restarts. Deterministic. Needs >= 3 observed values.
MleResult fit_mle(const OrderedSeries& series, const MleOptions& options = {});

struct ImputationResult {
    std::vector<double> values;  // series order; observed kept, missing smoothed
    MleResult fit;
    std::vector<std::size_t> imputed_positions;
    std::vector<double> imputed_variances;  // smoothed variance at imputed_positions
};

ImputationResult impute_series(const OrderedSeries& series, const MleOptions& options = {});

/// Imputes with fixed parameters (no estimation).
ImputationResult impute_series(const OrderedSeries& series, const LocalLevelParams& params);

/// Draws one path of the model at the given strictly increasing distances.
std::vector<double> simulate_local_level(std::span<const double> distances, double sigma2_eps, double sigma2_eta,
                                         double initial_level, std::mt19937_64& rng);

}  // namespace spcar
