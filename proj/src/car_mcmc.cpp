#include "spcar/car_mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <fmt/format.h>

#include "spcar/csv.hpp"
#include "spcar/error.hpp"
#include "spcar/impute_bench.hpp"

namespace spcar {

namespace {

Eigen::VectorXd standard_normals(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = z(rng);
    return out;
}

double logit(double p) { return std::log(p) - std::log1p(-p); }
double inv_logit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void check_finite(const McmcState& s, std::size_t iteration) {
    auto fail = [&](std::string_view what) {
        throw NumericalError(fmt::format("non-finite state at iteration {}: {}", iteration, what));
    };
    if (!s.beta.allFinite()) fail("beta");
    if (!s.phi.allFinite()) fail("phi");
    if (!std::isfinite(s.tau2) || !(s.tau2 > 0.0)) fail("tau2");
    if (!std::isfinite(s.nu2) || !(s.nu2 > 0.0)) fail("nu2");
    if (!(s.rho >= 0.0 && s.rho < 1.0)) fail("rho");
    if (!s.y_miss.allFinite()) fail("y_miss");
}

}  // namespace

void CarModelInput::validate() const {
    if (!graph) throw ContractError("model input has no graph");
    const Eigen::Index rows = y.size();
    if (X.rows() != rows || offset.size() != rows || static_cast<Eigen::Index>(missing.size()) != rows ||
        static_cast<Eigen::Index>(zcta_index.size()) != rows)
        throw ContractError("model input: row counts differ");
    if (X.cols() < 1) throw ContractError("model input: design has no columns");
    if (!X.allFinite()) throw ContractError("model input: design matrix has missing or non-finite entries");
    if (!offset.allFinite()) throw ContractError("model input: non-finite offset");
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (zcta_index[static_cast<std::size_t>(i)] >= graph->size())
            throw ContractError(fmt::format("model input: row {} maps to an unknown zcta", i));
        if (!missing[static_cast<std::size_t>(i)] && !std::isfinite(y[i]))
            throw ContractError(fmt::format("model input: non-finite response at row {}", i));
    }
    if (!coefficient_names.empty() && static_cast<Eigen::Index>(coefficient_names.size()) != X.cols())
        throw ContractError("model input: coefficient_names length differs from design columns");
    if (!row_ids.empty() && static_cast<Eigen::Index>(row_ids.size()) != rows)
        throw ContractError("model input: row_ids length differs from rows");
}

Priors Priors::defaults(Eigen::Index n_coef) {
    Priors p;
    p.mu_beta = Eigen::VectorXd::Zero(n_coef);
    p.sigma_beta = 1e5 * Eigen::MatrixXd::Identity(n_coef, n_coef);
    return p;
}

void Priors::validate(Eigen::Index n_coef) const {
    if (mu_beta.size() != n_coef || sigma_beta.rows() != n_coef || sigma_beta.cols() != n_coef)
        throw ContractError("priors: dimension mismatch with design");
    if (!(a > 0.0 && b > 0.0)) throw ContractError("priors: a and b must be positive");
    if (!sigma_beta.isApprox(sigma_beta.transpose())) throw ContractError("priors: sigma_beta not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_beta);
    if (llt.info() != Eigen::Success) throw ContractError("priors: sigma_beta not positive definite");
}

void McmcConfig::validate() const {
    if (n_burnin < 1 || n_keep < 1 || thin < 1 || n_chains < 1) throw ConfigError("mcmc counts must be >= 1");
    if (!(rho_step > 0.0)) throw ConfigError("rho_step must be positive");
    if (fixed_rho && !(*fixed_rho >= 0.0 && *fixed_rho < 1.0)) throw ConfigError("fixed_rho must lie in [0, 1)");
    if (fixed_nu2 && !(*fixed_nu2 > 0.0)) throw ConfigError("fixed_nu2 must be positive");
}

CarModel::CarModel(CarModelInput input, Priors priors) : input_(std::move(input)), priors_(std::move(priors)) {
    input_.validate();
    priors_.validate(input_.n_coef());
    if (input_.coefficient_names.empty())
        for (Eigen::Index j = 0; j < input_.n_coef(); ++j) input_.coefficient_names.push_back(fmt::format("beta_{}", j));
    rows_by_zcta_.resize(input_.K());
    for (std::size_t i = 0; i < input_.missing.size(); ++i) {
        rows_by_zcta_[input_.zcta_index[i]].push_back(i);
        if (input_.missing[i]) missing_rows_.push_back(i);
    }
    XtX_ = input_.X.transpose() * input_.X;
    prior_precision_ = priors_.sigma_beta.llt().solve(Eigen::MatrixXd::Identity(input_.n_coef(), input_.n_coef()));
    prior_shift_ = prior_precision_ * priors_.mu_beta;
    for (Eigen::Index j = 0; j < input_.n_coef(); ++j)
        if ((input_.X.col(j).array() == 1.0).all()) {
            intercept_ = j;
            break;
        }
}

Eigen::VectorXd CarModel::filled_y(const McmcState& state) const {
    Eigen::VectorXd y = input_.y;
    for (std::size_t m = 0; m < missing_rows_.size(); ++m)
        y[static_cast<Eigen::Index>(missing_rows_[m])] = state.y_miss[static_cast<Eigen::Index>(m)];
    return y;
}

Eigen::VectorXd CarModel::linear_predictor(const McmcState& state) const {
    Eigen::VectorXd mu = input_.X * state.beta + input_.offset;
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu[i] += state.phi[static_cast<Eigen::Index>(input_.zcta_index[static_cast<std::size_t>(i)])];
    return mu;
}

NormalMoments car_full_conditional(std::size_t k, const Eigen::VectorXd& phi, double rho, double tau2,
                                   const ZctaGraph& graph) {
    const double n_k = static_cast<double>(graph.degrees()[k]);
    const double denom = rho * n_k + 1.0 - rho;
    return {rho * graph.neighbor_sum(k, phi) / denom, tau2 / denom};
}

namespace {

struct BetaSystem {
    Eigen::LLT<Eigen::MatrixXd> llt;  // of the conditional precision
    Eigen::VectorXd mean;
};

BetaSystem beta_system(const McmcState& state, const CarModel& model) {
    const auto& in = model.input();
    Eigen::VectorXd target = model.filled_y(state) - in.offset;
    for (Eigen::Index i = 0; i < target.size(); ++i)
        target[i] -= state.phi[static_cast<Eigen::Index>(in.zcta_index[static_cast<std::size_t>(i)])];
    Eigen::MatrixXd precision = model.XtX() / state.nu2 + model.prior_precision();
    Eigen::VectorXd m = in.X.transpose() * target / state.nu2 + model.prior_shift();
    BetaSystem sys{Eigen::LLT<Eigen::MatrixXd>(precision), {}};
    if (sys.llt.info() != Eigen::Success) {
        Eigen::VectorXd d = precision.diagonal();
        throw NumericalError(fmt::format("beta precision not SPD (diag min {}, max {})", d.minCoeff(), d.maxCoeff()));
    }
    sys.mean = sys.llt.solve(m);
    return sys;
}

}  // namespace

GaussianMoments beta_conditional(const McmcState& state, const CarModel& model) {
    BetaSystem sys = beta_system(state, model);
    const auto p = sys.mean.size();
    return {sys.mean, sys.llt.solve(Eigen::MatrixXd::Identity(p, p))};
}

Eigen::VectorXd gibbs_beta(const McmcState& state, const CarModel& model, Rng& rng) {
    BetaSystem sys = beta_system(state, model);
    // precision = L L', so L^-T z has covariance precision^-1.
    Eigen::VectorXd z = standard_normals(sys.mean.size(), rng);
    return sys.mean + sys.llt.matrixU().solve(z);
}

namespace {

// Sum over the rows of each ZCTA of y* - x'beta - O.
Eigen::VectorXd residual_sums(const McmcState& state, const CarModel& model) {
    const auto& in = model.input();
    Eigen::VectorXd r = model.filled_y(state) - in.X * state.beta - in.offset;
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(in.K()));
    for (Eigen::Index i = 0; i < r.size(); ++i) sums[static_cast<Eigen::Index>(in.zcta_index[static_cast<std::size_t>(i)])] += r[i];
    return sums;
}

NormalMoments phi_moments(std::size_t k, double residual_sum, const Eigen::VectorXd& phi, const McmcState& state,
                          const CarModel& model) {
    const ZctaGraph& g = model.graph();
    const double m_k = static_cast<double>(model.rows_by_zcta()[k].size());
    const double n_k = static_cast<double>(g.degrees()[k]);
    const double prior_prec = (state.rho * n_k + 1.0 - state.rho) / state.tau2;
    const double v = 1.0 / (m_k / state.nu2 + prior_prec);
    const double mean = v * (residual_sum / state.nu2 + state.rho * g.neighbor_sum(k, phi) / state.tau2);
    return {mean, v};
}

}  // namespace

NormalMoments phi_site_conditional(std::size_t k, const McmcState& state, const CarModel& model) {
    Eigen::VectorXd sums = residual_sums(state, model);
    return phi_moments(k, sums[static_cast<Eigen::Index>(k)], state.phi, state, model);
}

Eigen::VectorXd sweep_phi(const McmcState& state, const CarModel& model, Rng& rng) {
    Eigen::VectorXd sums = residual_sums(state, model);
    Eigen::VectorXd phi = state.phi;
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t k = 0; k < model.input().K(); ++k) {
        NormalMoments c = phi_moments(k, sums[static_cast<Eigen::Index>(k)], phi, state, model);
        phi[static_cast<Eigen::Index>(k)] = c.mean + std::sqrt(c.variance) * z(rng);
    }
    return phi;
}

Eigen::VectorXd gibbs_phi(const McmcState& state, const CarModel& model, Rng& rng) {
    Eigen::VectorXd phi = sweep_phi(state, model, rng);
    phi.array() -= phi.mean();
    return phi;
}

InverseGammaParams tau2_conditional(const McmcState& state, const CarModel& model) {
    const double K = static_cast<double>(model.input().K());
    return {model.priors().a + K / 2.0, model.priors().b + model.graph().quad_form(state.phi, state.rho) / 2.0};
}

InverseGammaParams nu2_conditional(const McmcState& state, const CarModel& model) {
    Eigen::VectorXd resid = model.filled_y(state) - model.linear_predictor(state);
    const double n = static_cast<double>(model.input().n());
    return {model.priors().a + n / 2.0, model.priors().b + resid.squaredNorm() / 2.0};
}

double draw_inverse_gamma(InverseGammaParams p, Rng& rng) {
    if (!(p.shape > 0.0 && p.scale > 0.0)) throw NumericalError("inverse-gamma parameters must be positive");
    std::gamma_distribution<double> g(p.shape, 1.0 / p.scale);
    return 1.0 / g(rng);
}

double gibbs_tau2(const McmcState& state, const CarModel& model, Rng& rng) {
    return draw_inverse_gamma(tau2_conditional(state, model), rng);
}

double gibbs_nu2(const McmcState& state, const CarModel& model, Rng& rng) {
    return draw_inverse_gamma(nu2_conditional(state, model), rng);
}

double rho_log_acceptance(const McmcState& state, double proposal, const ZctaGraph& graph) {
    const double delta_logdet = logdet_precision(proposal, 1.0, graph) - logdet_precision(state.rho, 1.0, graph);
    const double delta_quad = graph.quad_form(state.phi, proposal) - graph.quad_form(state.phi, state.rho);
    const double delta_jacobian =
        (std::log(proposal) + std::log1p(-proposal)) - (std::log(state.rho) + std::log1p(-state.rho));
    return 0.5 * delta_logdet - delta_quad / (2.0 * state.tau2) + delta_jacobian;
}

RhoUpdate mh_rho(const McmcState& state, const ZctaGraph& graph, double step, Rng& rng) {
    if (!(state.rho > 0.0 && state.rho < 1.0)) throw ContractError("mh_rho: rho must lie in (0, 1)");
    std::normal_distribution<double> z(0.0, 1.0);
    double proposal = inv_logit(logit(state.rho) + step * z(rng));
    // Saturation of the logistic map at extreme logits.
    if (!(proposal > 0.0 && proposal < 1.0)) return {state.rho, false};
    double log_ratio = rho_log_acceptance(state, proposal, graph);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (std::log(u(rng)) < log_ratio) return {proposal, true};
    return {state.rho, false};
}

Eigen::VectorXd impute_missing_y(const McmcState& state, const CarModel& model, Rng& rng) {
    const auto& rows = model.missing_rows();
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    if (rows.empty()) return out;
    const auto& in = model.input();
    const double sd = std::sqrt(state.nu2);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t m = 0; m < rows.size(); ++m) {
        const auto i = static_cast<Eigen::Index>(rows[m]);
        double mu = in.X.row(i).dot(state.beta) + in.offset[i] +
                    state.phi[static_cast<Eigen::Index>(in.zcta_index[rows[m]])];
        out[static_cast<Eigen::Index>(m)] = mu + sd * z(rng);
    }
    return out;
}

McmcState initial_state(const CarModel& model, const McmcConfig& config) {
    const auto& in = model.input();
    std::vector<Eigen::Index> observed;
    for (Eigen::Index i = 0; i < in.n(); ++i)
        if (!in.missing[static_cast<std::size_t>(i)]) observed.push_back(i);

    McmcState s;
    s.phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(in.K()));
    s.tau2 = 0.01;
    s.nu2 = config.fixed_nu2.value_or(0.01);
    s.rho = config.fixed_rho.value_or(0.5);
    if (observed.empty()) {
        s.beta = model.priors().mu_beta;
    } else {
        Eigen::MatrixXd Xo(static_cast<Eigen::Index>(observed.size()), in.n_coef());
        Eigen::VectorXd yo(static_cast<Eigen::Index>(observed.size()));
        for (std::size_t r = 0; r < observed.size(); ++r) {
            Xo.row(static_cast<Eigen::Index>(r)) = in.X.row(observed[r]);
            yo[static_cast<Eigen::Index>(r)] = in.y[observed[r]] - in.offset[observed[r]];
        }
        s.beta = Xo.colPivHouseholderQr().solve(yo);
        if (!s.beta.allFinite()) s.beta = model.priors().mu_beta;
    }
    s.y_miss.resize(static_cast<Eigen::Index>(model.missing_rows().size()));
    Eigen::VectorXd mu = model.linear_predictor(s);
    for (std::size_t m = 0; m < model.missing_rows().size(); ++m)
        s.y_miss[static_cast<Eigen::Index>(m)] = mu[static_cast<Eigen::Index>(model.missing_rows()[m])];
    return s;
}

Chains run_chain(const CarModel& model, const McmcConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const auto& in = model.input();
    const auto n_coef = in.n_coef();
    const auto K = static_cast<Eigen::Index>(in.K());
    const auto n_miss = static_cast<Eigen::Index>(model.missing_rows().size());
    const auto n_keep = static_cast<Eigen::Index>(config.n_keep);

    Chains ch;
    ch.scalar_names = in.coefficient_names;
    ch.scalar_names.insert(ch.scalar_names.end(), {"tau2", "nu2", "rho"});
    ch.scalars.resize(n_keep, n_coef + 3);
    if (config.store_phi) ch.phi.resize(n_keep, K);
    ch.y_miss.resize(n_keep, n_miss);
    ch.mu_miss.resize(n_keep, n_miss);
    ch.fitted_mean = Eigen::VectorXd::Zero(in.n());
    ch.phi_mean = Eigen::VectorXd::Zero(K);
    ch.missing_rows = model.missing_rows();
    for (std::size_t r : ch.missing_rows)
        ch.missing_ids.push_back(in.row_ids.empty() ? fmt::format("row_{}", r) : in.row_ids[r]);

    McmcState s = initial_state(model, config);
    double step = config.rho_step;
    std::size_t window_accepts = 0;
    std::size_t window_size = 0;
    std::size_t burnin_accepts = 0;
    std::size_t sampling_accepts = 0;
    constexpr std::size_t kAdaptWindow = 100;

    const std::size_t total = config.n_burnin + config.n_keep * config.thin;
    Eigen::Index kept = 0;
    for (std::size_t iter = 0; iter < total; ++iter) {
        const bool burnin = iter < config.n_burnin;
        s.beta = gibbs_beta(s, model, rng);
        // Centering the state would change the target under a proper prior,
        // so it is applied to the stored draws instead.
        s.phi = sweep_phi(s, model, rng);
        s.tau2 = gibbs_tau2(s, model, rng);
        if (!config.fixed_nu2) s.nu2 = gibbs_nu2(s, model, rng);
        if (!config.fixed_rho) {
            RhoUpdate u = mh_rho(s, model.graph(), step, rng);
            s.rho = u.rho;
            if (burnin) {
                burnin_accepts += u.accepted;
                window_accepts += u.accepted;
                if (config.adapt_rho_step && ++window_size == kAdaptWindow) {
                    double rate = static_cast<double>(window_accepts) / static_cast<double>(kAdaptWindow);
                    if (rate < 0.40) step *= 0.8;
                    else if (rate > 0.50) step *= 1.25;
                    window_accepts = 0;
                    window_size = 0;
                }
            } else {
                sampling_accepts += u.accepted;
            }
        }
        s.y_miss = impute_missing_y(s, model, rng);
        check_finite(s, iter);

        if (!burnin && (iter - config.n_burnin + 1) % config.thin == 0) {
            const double level = model.intercept_column() ? s.phi.mean() : 0.0;
            ch.scalars.row(kept).head(n_coef) = s.beta.transpose();
            if (model.intercept_column()) ch.scalars(kept, *model.intercept_column()) += level;
            ch.scalars(kept, n_coef) = s.tau2;
            ch.scalars(kept, n_coef + 1) = s.nu2;
            ch.scalars(kept, n_coef + 2) = s.rho;
            if (config.store_phi) ch.phi.row(kept) = (s.phi.array() - level).matrix().transpose();
            Eigen::VectorXd mu = model.linear_predictor(s);
            ch.fitted_mean += mu;
            ch.phi_mean += (s.phi.array() - level).matrix();
            ch.y_miss.row(kept) = s.y_miss.transpose();
            for (Eigen::Index m = 0; m < n_miss; ++m)
                ch.mu_miss(kept, m) = mu[static_cast<Eigen::Index>(ch.missing_rows[static_cast<std::size_t>(m)])];
            ++kept;
        }
    }
    ch.fitted_mean /= static_cast<double>(kept);
    ch.phi_mean /= static_cast<double>(kept);
    ch.manifest.chains = 1;
    ch.manifest.burnin_iterations = config.n_burnin;
    ch.manifest.sampling_iterations = config.n_keep * config.thin;
    ch.manifest.retained_draws = static_cast<std::size_t>(kept);
    ch.manifest.rho_acceptance_burnin = static_cast<double>(burnin_accepts) / static_cast<double>(config.n_burnin);
    ch.manifest.rho_acceptance_sampling =
        static_cast<double>(sampling_accepts) / static_cast<double>(config.n_keep * config.thin);
    ch.manifest.rho_step = step;
    return ch;
}

Chains run_mcmc(const CarModel& model, const McmcConfig& config) {
    config.validate();
    std::vector<Chains> chains(config.n_chains);
    auto seed_of = [&](std::size_t c) { return c == 0 ? config.seed : hash64(config.seed, c); };
    if (config.threads > 1 && config.n_chains > 1) {
        std::vector<std::jthread> workers;
        for (std::size_t c = 0; c < config.n_chains; ++c)
            workers.emplace_back([&, c] { chains[c] = run_chain(model, config, seed_of(c)); });
    } else {
        for (std::size_t c = 0; c < config.n_chains; ++c) chains[c] = run_chain(model, config, seed_of(c));
    }
    if (chains.size() == 1) return std::move(chains.front());

    Chains merged = chains.front();
    auto stack = [](const std::vector<Chains>& cs, auto member) {
        Eigen::Index rows = 0;
        for (const auto& c : cs) rows += (c.*member).rows();
        Eigen::MatrixXd out(rows, (cs.front().*member).cols());
        Eigen::Index at = 0;
        for (const auto& c : cs) {
            out.middleRows(at, (c.*member).rows()) = c.*member;
            at += (c.*member).rows();
        }
        return out;
    };
    merged.scalars = stack(chains, &Chains::scalars);
    merged.phi = stack(chains, &Chains::phi);
    merged.y_miss = stack(chains, &Chains::y_miss);
    merged.mu_miss = stack(chains, &Chains::mu_miss);
    merged.fitted_mean.setZero();
    merged.phi_mean.setZero();
    double acc_b = 0.0;
    double acc_s = 0.0;
    for (const auto& c : chains) {
        merged.fitted_mean += c.fitted_mean / static_cast<double>(chains.size());
        merged.phi_mean += c.phi_mean / static_cast<double>(chains.size());
        acc_b += c.manifest.rho_acceptance_burnin / static_cast<double>(chains.size());
        acc_s += c.manifest.rho_acceptance_sampling / static_cast<double>(chains.size());
    }
    merged.manifest.chains = chains.size();
    merged.manifest.retained_draws = static_cast<std::size_t>(merged.scalars.rows());
    merged.manifest.rho_acceptance_burnin = acc_b;
    merged.manifest.rho_acceptance_sampling = acc_s;
    merged.manifest.rho_step = chains.back().manifest.rho_step;
    return merged;
}

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw ContractError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("quantile probability must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

ParameterSummary summarize_column(std::string name, const Eigen::VectorXd& col) {
    std::vector<double> xs(col.data(), col.data() + col.size());
    ParameterSummary s;
    s.name = std::move(name);
    s.mean = col.mean();
    s.lower = quantile_type7(xs, 0.025);
    s.upper = quantile_type7(xs, 0.975);
    return s;
}

}  // namespace

PosteriorSummary summarize_posterior(const Chains& chains) {
    if (chains.scalars.rows() < 100)
        throw ContractError(fmt::format("summary needs at least 100 draws, found {}", chains.scalars.rows()));
    PosteriorSummary out;
    for (Eigen::Index j = 0; j < chains.scalars.cols(); ++j)
        out.parameters.push_back(summarize_column(chains.scalar_names[static_cast<std::size_t>(j)], chains.scalars.col(j)));
    for (Eigen::Index m = 0; m < chains.y_miss.cols(); ++m)
        out.missing_responses.push_back(summarize_column(chains.missing_ids[static_cast<std::size_t>(m)], chains.y_miss.col(m)));
    out.fitted = chains.fitted_mean;
    return out;
}

void write_chains_csv(const std::filesystem::path& path, const Chains& chains) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << fmt::format("{}\n", fmt::join(chains.scalar_names, ","));
    for (Eigen::Index r = 0; r < chains.scalars.rows(); ++r) {
        for (Eigen::Index c = 0; c < chains.scalars.cols(); ++c)
            out << (c ? "," : "") << csv::format_real(chains.scalars(r, c));
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_phi_csv(const std::filesystem::path& path, const Chains& chains, const ZctaGraph& graph) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    if (chains.phi.size() > 0) {
        out << fmt::format("{}\n", fmt::join(graph.ids(), ","));
        for (Eigen::Index r = 0; r < chains.phi.rows(); ++r) {
            for (Eigen::Index c = 0; c < chains.phi.cols(); ++c)
                out << (c ? "," : "") << csv::format_real(chains.phi(r, c));
            out << '\n';
        }
    } else {
        out << "zcta_id,phi_mean\n";
        for (std::size_t k = 0; k < graph.size(); ++k)
            out << graph.ids()[k] << ',' << csv::format_real(chains.phi_mean[static_cast<Eigen::Index>(k)]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_summary_csv(const std::filesystem::path& path, const PosteriorSummary& summary) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "parameter,mean,q2.5,q97.5\n";
    auto row = [&](const ParameterSummary& p) {
        out << fmt::format("{},{},{},{}\n", p.name, csv::format_real(p.mean), csv::format_real(p.lower),
                           csv::format_real(p.upper));
    };
    for (const auto& p : summary.parameters) row(p);
    for (const auto& p : summary.missing_responses) {
        ParameterSummary named = p;
        named.name = "y_missing:" + p.name;
        row(named);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Eigen::VectorXd draw_car_prior(const ZctaGraph& graph, double rho, double tau2, Rng& rng) {
    const auto K = static_cast<Eigen::Index>(graph.size());
    Eigen::MatrixXd Q = -rho * graph.dense_adjacency();
    for (Eigen::Index k = 0; k < K; ++k)
        Q(k, k) = rho * static_cast<double>(graph.degrees()[static_cast<std::size_t>(k)]) + 1.0 - rho;
    Eigen::LLT<Eigen::MatrixXd> llt(Q);
    if (llt.info() != Eigen::Success) throw NumericalError("CAR precision not positive definite");
    Eigen::VectorXd z = standard_normals(K, rng);
    return std::sqrt(tau2) * llt.matrixU().solve(z);
}

}  // namespace spcar
