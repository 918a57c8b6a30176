#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spcar/zcta_graph.hpp"

namespace spcar {

using Rng = std::mt19937_64;

// Two-level Gaussian model with a Leroux CAR effect per ZCTA:
//   y_kj = x_kj' beta + O_kj + phi_k + e_kj,   e_kj ~ N(0, nu2)
//   phi  ~ N(0, tau2 Q(rho)^-1),  Q(rho) = rho (D - W*) + (1 - rho) I
struct CarModelInput {
    Eigen::VectorXd y;                   // log(SHR); entries at missing rows are ignored
    std::vector<bool> missing;           // true where the response is unobserved
    Eigen::MatrixXd X;                   // n x (p + 1), first column the intercept
    Eigen::VectorXd offset;              // log ZCTA population
    std::vector<std::size_t> zcta_index; // row -> graph node (0-based)
    std::shared_ptr<const ZctaGraph> graph;
    std::vector<std::string> coefficient_names;  // p + 1 names; defaults to beta_0..beta_p
    std::vector<std::string> row_ids;            // optional, for reporting

    Eigen::Index n() const { return y.size(); }
    Eigen::Index n_coef() const { return X.cols(); }
    std::size_t K() const { return graph ? graph->size() : 0; }
    void validate() const;
};

struct Priors {
    Eigen::VectorXd mu_beta;
    Eigen::MatrixXd sigma_beta;
    double a = 1.0;
    double b = 0.01;

    /// mu = 0, Sigma = 1e5 I, a = 1, b = 0.01.
    static Priors defaults(Eigen::Index n_coef);
    void validate(Eigen::Index n_coef) const;
};

struct McmcConfig {
    std::size_t n_burnin = 20000;
    std::size_t n_keep = 50000;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
    double rho_step = 1.0;        // logit-scale random-walk SD (initial value when adapting)
    bool adapt_rho_step = true;   // tune during burn-in toward 40-50% acceptance
    std::optional<double> fixed_rho;  // skip the rho update; 0 gives the non-spatial model
    std::optional<double> fixed_nu2;  // skip the nu2 update
    bool store_phi = false;
    std::size_t n_chains = 1;
    unsigned threads = 1;

    void validate() const;
};

struct McmcState {
    Eigen::VectorXd beta;
    Eigen::VectorXd phi;
    double tau2 = 0.01;
    double nu2 = 0.01;
    double rho = 0.5;
    Eigen::VectorXd y_miss;  // aligned with CarModel::missing_rows()
};

/// Input plus priors with the invariant pieces of every update precomputed.
class CarModel {
public:
    CarModel(CarModelInput input, Priors priors);

    const CarModelInput& input() const { return input_; }
    const Priors& priors() const { return priors_; }
    const ZctaGraph& graph() const { return *input_.graph; }
    const std::vector<std::size_t>& missing_rows() const { return missing_rows_; }
    const std::vector<std::vector<std::size_t>>& rows_by_zcta() const { return rows_by_zcta_; }
    const Eigen::MatrixXd& XtX() const { return XtX_; }
    const Eigen::MatrixXd& prior_precision() const { return prior_precision_; }
    const Eigen::VectorXd& prior_shift() const { return prior_shift_; }  // Sigma^-1 mu
    /// First all-ones design column, if any.
    std::optional<Eigen::Index> intercept_column() const { return intercept_; }

    /// y with the state's current imputations at missing rows.
    Eigen::VectorXd filled_y(const McmcState& state) const;
    /// mu = X beta + O + Z phi.
    Eigen::VectorXd linear_predictor(const McmcState& state) const;

private:
    CarModelInput input_;
    Priors priors_;
    std::vector<std::size_t> missing_rows_;
    std::vector<std::vector<std::size_t>> rows_by_zcta_;
    Eigen::MatrixXd XtX_;
    Eigen::MatrixXd prior_precision_;
    Eigen::VectorXd prior_shift_;
    std::optional<Eigen::Index> intercept_;
};

struct NormalMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Prior conditional phi_k | phi_-k under the Leroux CAR.
NormalMoments car_full_conditional(std::size_t k, const Eigen::VectorXd& phi, double rho, double tau2,
                                   const ZctaGraph& graph);

struct GaussianMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Full conditional of beta: N(V m, V), V = (X'X/nu2 + Sigma^-1)^-1,
/// m = X'(y* - O - Z phi)/nu2 + Sigma^-1 mu.
GaussianMoments beta_conditional(const McmcState& state, const CarModel& model);
Eigen::VectorXd gibbs_beta(const McmcState& state, const CarModel& model, Rng& rng);

/// Full conditional of phi_k given everything else (prior conditional
/// combined with the rows of ZCTA k).
NormalMoments phi_site_conditional(std::size_t k, const McmcState& state, const CarModel& model);

/// Single-site sweep k = 0..K-1 without centering.
Eigen::VectorXd sweep_phi(const McmcState& state, const CarModel& model, Rng& rng);
/// sweep_phi followed by centering phi to mean zero.
Eigen::VectorXd gibbs_phi(const McmcState& state, const CarModel& model, Rng& rng);

struct InverseGammaParams {
    double shape = 0.0;
    double scale = 0.0;
};

InverseGammaParams tau2_conditional(const McmcState& state, const CarModel& model);
InverseGammaParams nu2_conditional(const McmcState& state, const CarModel& model);
double gibbs_tau2(const McmcState& state, const CarModel& model, Rng& rng);
double gibbs_nu2(const McmcState& state, const CarModel& model, Rng& rng);
double draw_inverse_gamma(InverseGammaParams p, Rng& rng);

/// Log acceptance ratio of moving rho -> proposal under the logit random walk.
double rho_log_acceptance(const McmcState& state, double proposal, const ZctaGraph& graph);

struct RhoUpdate {
    double rho = 0.5;
    bool accepted = false;
};

RhoUpdate mh_rho(const McmcState& state, const ZctaGraph& graph, double step, Rng& rng);

/// Posterior-predictive draws N(mu_kj, nu2) at the missing rows.
Eigen::VectorXd impute_missing_y(const McmcState& state, const CarModel& model, Rng& rng);

/// Least-squares start: beta from y* - O on X over observed rows, phi = 0,
/// tau2 = nu2 = 0.01, rho = 0.5 (or the configured fixed values).
McmcState initial_state(const CarModel& model, const McmcConfig& config);

/// Retained draws of one or more chains (concatenated in chain order). The
/// sampler runs on uncentered phi; stored draws report phi - mean(phi) with
/// mean(phi) moved into the intercept, which leaves every mu unchanged.
struct Chains {
    std::vector<std::string> scalar_names;  // coefficient names, tau2, nu2, rho
    Eigen::MatrixXd scalars;                // one row per retained draw
    Eigen::MatrixXd phi;                    // empty unless store_phi
    Eigen::MatrixXd y_miss;                 // draws x missing rows
    Eigen::MatrixXd mu_miss;                // mu at the missing rows, same iteration
    Eigen::VectorXd fitted_mean;            // posterior mean of mu for every row
    Eigen::VectorXd phi_mean;               // posterior mean of phi
    std::vector<std::size_t> missing_rows;
    std::vector<std::string> missing_ids;

    struct Manifest {
        std::size_t chains = 0;
        std::size_t burnin_iterations = 0;  // per chain
        std::size_t sampling_iterations = 0;  // per chain
        std::size_t retained_draws = 0;     // total
        double rho_acceptance_burnin = 0.0;
        double rho_acceptance_sampling = 0.0;
        double rho_step = 0.0;              // frozen step of the last chain
    } manifest;
};

Chains run_chain(const CarModel& model, const McmcConfig& config, std::uint64_t seed);
Chains run_mcmc(const CarModel& model, const McmcConfig& config);

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double lower = 0.0;  // 2.5%
    double upper = 0.0;  // 97.5%
};

struct PosteriorSummary {
    std::vector<ParameterSummary> parameters;
    std::vector<ParameterSummary> missing_responses;
    Eigen::VectorXd fitted;  // posterior mean of mu per row
};

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
double quantile_type7(std::vector<double> values, double p);

/// Needs >= 100 retained draws.
PosteriorSummary summarize_posterior(const Chains& chains);

void write_chains_csv(const std::filesystem::path& path, const Chains& chains);
void write_phi_csv(const std::filesystem::path& path, const Chains& chains, const ZctaGraph& graph);
void write_summary_csv(const std::filesystem::path& path, const PosteriorSummary& summary);

/// phi ~ N(0, tau2 Q(rho)^-1) via a dense Cholesky factor of Q(rho).
Eigen::VectorXd draw_car_prior(const ZctaGraph& graph, double rho, double tau2, Rng& rng);

}  // namespace spcar
