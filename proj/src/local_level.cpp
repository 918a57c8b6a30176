#include "spcar/local_level.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "spcar/error.hpp"

namespace spcar {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_inputs(const OrderedSeries& series, const LocalLevelParams& params) {
    params.validate();
    if (series.n_observed == 0) throw NumericalError("no observations");
    for (std::size_t i = 0; i < series.size(); ++i)
        if (series.values[i] && !std::isfinite(*series.values[i]))
            throw NumericalError(fmt::format("non-finite observation at position {}", i));
}

struct SampleMoments {
    double first = 0.0;
    double mean = 0.0;
    double variance = 0.0;  // n - 1 denominator
};

SampleMoments observed_moments(const OrderedSeries& series) {
    SampleMoments m;
    std::size_t n = 0;
    double sum = 0.0;
    for (const auto& v : series.values) {
        if (!v) continue;
        if (n == 0) m.first = *v;
        sum += *v;
        ++n;
    }
    m.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& v : series.values)
        if (v) ss += (*v - m.mean) * (*v - m.mean);
    m.variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    return m;
}

struct Objective {
    const OrderedSeries* series;
    double init_mean;
    double init_var;
    double floor;
    int evaluations = 0;
    double best_value = std::numeric_limits<double>::infinity();
    std::array<double, 2> best_point{};

    LocalLevelParams params_at(double log_eps, double log_eta) const {
        return {std::max(std::exp(log_eps), floor), std::max(std::exp(log_eta), floor), init_mean, init_var};
    }

    double operator()(double log_eps, double log_eta) {
        ++evaluations;
        double ll = log_likelihood(*series, params_at(log_eps, log_eta));
        double value = std::isfinite(ll) ? -ll : std::numeric_limits<double>::max();
        if (value < best_value) {
            best_value = value;
            best_point = {log_eps, log_eta};
        }
        return value;
    }
};

double gsl_objective(const gsl_vector* x, void* data) {
    auto* obj = static_cast<Objective*>(data);
    return (*obj)(gsl_vector_get(x, 0), gsl_vector_get(x, 1));
}

struct SimplexRun {
    double start_value = 0.0;
    double end_value = 0.0;
    bool converged = false;
};

SimplexRun run_simplex(Objective& obj, std::array<double, 2> start, const MleOptions& options) {
    gsl_multimin_function fn{&gsl_objective, 2, &obj};
    gsl_vector* x = gsl_vector_alloc(2);
    gsl_vector* step = gsl_vector_alloc(2);
    gsl_vector_set(x, 0, start[0]);
    gsl_vector_set(x, 1, start[1]);
    gsl_vector_set_all(step, 1.0);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);

    SimplexRun run;
    run.start_value = obj(start[0], start[1]);
    const int budget_end = obj.evaluations + options.max_evaluations;
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    while (obj.evaluations < budget_end) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), options.size_tolerance) == GSL_SUCCESS) {
            run.converged = true;
            break;
        }
    }
    run.end_value = s->fval;
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return run;
}

}  // namespace

void LocalLevelParams::validate() const {
    if (!(sigma2_eps >= 0.0) || !(sigma2_eta >= 0.0)) throw ContractError("variances must be non-negative");
    if (!(sigma2_eps + sigma2_eta > 0.0)) throw ContractError("degenerate model: both variances are zero");
    if (!(init_var > 0.0) || !std::isfinite(init_var)) throw ContractError("init_var must be positive");
    if (!std::isfinite(init_mean)) throw ContractError("init_mean must be finite");
}

FilterOutput kalman_filter(const OrderedSeries& series, const LocalLevelParams& params) {
    check_inputs(series, params);
    const std::size_t n = series.size();
    FilterOutput out;
    out.steps.resize(n);
    double a = params.init_mean;
    double P = params.init_var;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        FilterStep& step = out.steps[i];
        step.predicted_mean = a;
        step.predicted_var = P;
        if (series.values[i]) {
            double v = *series.values[i] - a;
            double F = P + params.sigma2_eps;
            double K = P / F;
            step.innovation = Innovation{v, F, K};
            ll -= 0.5 * (kLog2Pi + std::log(F) + v * v / F);
            a += K * v;
            P = P * params.sigma2_eps / F;
        }
        if (i + 1 < n) P += series.gaps[i + 1] * params.sigma2_eta;
    }
    out.log_likelihood = ll;
    return out;
}

double log_likelihood(const OrderedSeries& series, const LocalLevelParams& params) {
    const std::size_t n = series.size();
    double a = params.init_mean;
    double P = params.init_var;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (series.values[i]) {
            double v = *series.values[i] - a;
            double F = P + params.sigma2_eps;
            ll -= 0.5 * (kLog2Pi + std::log(F) + v * v / F);
            a += P / F * v;
            P = P * params.sigma2_eps / F;
        }
        if (i + 1 < n) P += series.gaps[i + 1] * params.sigma2_eta;
    }
    return ll;
}

SmootherOutput kalman_smoother(const FilterOutput& filter, const OrderedSeries& series) {
    const std::size_t n = series.size();
    if (filter.steps.size() != n) throw ContractError("smoother: filter and series lengths differ");
    SmootherOutput out;
    out.mean.resize(n);
    out.var.resize(n);
    double r = 0.0;
    double N = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const FilterStep& step = filter.steps[k];
        if (step.innovation.has_value() != series.values[k].has_value())
            throw ContractError(fmt::format("smoother: missingness mismatch at position {}", k));
        if (step.innovation) {
            const Innovation& in = *step.innovation;
            double L = 1.0 - in.K;
            r = in.v / in.F + L * r;
            N = 1.0 / in.F + L * L * N;
        }
        double P = step.predicted_var;
        out.mean[k] = step.predicted_mean + P * r;
        out.var[k] = std::clamp(P - P * P * N, 0.0, P);
    }
    return out;
}

MleResult fit_mle(const OrderedSeries& series, const MleOptions& options) {
    if (series.n_observed < 3)
        throw NumericalError(fmt::format("fit_mle needs at least 3 observations, found {}", series.n_observed));
    if (options.restarts < 1) throw ContractError("fit_mle: restarts must be >= 1");
    static const gsl_error_handler_t* previous_handler [[maybe_unused]] = gsl_set_error_handler_off();

    const SampleMoments m = observed_moments(series);
    const double scale = m.variance > 0.0 ? m.variance : 1.0;
    const double span = series.distances.back() - series.distances.front();
    const double mean_gap = series.size() > 1 && span > 0.0 ? span / static_cast<double>(series.size() - 1) : 1.0;

    Objective obj{&series, m.first, options.diffuse_scale * scale, options.variance_floor};

    // (fraction of variance to measurement noise, fraction to the level per mean gap)
    static constexpr std::array<std::array<double, 2>, 8> kStartShares = {{
        {0.5, 0.5}, {0.9, 0.1}, {0.1, 0.9}, {0.99, 1e-3}, {1e-3, 0.99},
        {0.5, 0.01}, {0.05, 0.05}, {2.0, 2.0},
    }};

    MleResult result;
    bool improved = false;
    for (int r = 0; r < options.restarts; ++r) {
        auto share = kStartShares[static_cast<std::size_t>(r) % kStartShares.size()];
        double widen = static_cast<double>(r / static_cast<int>(kStartShares.size()));
        std::array<double, 2> start = {std::log(share[0] * scale) - widen,
                                       std::log(share[1] * scale / mean_gap) + widen};
        SimplexRun run = run_simplex(obj, start, options);
        result.converged = result.converged || run.converged;
        improved = improved || run.end_value < run.start_value;
    }
    // Polish from the incumbent.
    SimplexRun polish = run_simplex(obj, obj.best_point, options);
    result.converged = result.converged || polish.converged;

    result.params = obj.params_at(obj.best_point[0], obj.best_point[1]);
    result.log_likelihood = -obj.best_value;
    result.evaluations = obj.evaluations;
    result.warning = !improved;
    return result;
}

ImputationResult impute_series(const OrderedSeries& series, const LocalLevelParams& params) {
    FilterOutput filter = kalman_filter(series, params);
    SmootherOutput smooth = kalman_smoother(filter, series);
    ImputationResult out;
    out.fit.params = params;
    out.fit.log_likelihood = filter.log_likelihood;
    out.values.resize(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.values[i]) {
            out.values[i] = *series.values[i];
        } else {
            out.values[i] = smooth.mean[i];
            out.imputed_positions.push_back(i);
            out.imputed_variances.push_back(smooth.var[i]);
        }
    }
    return out;
}

ImputationResult impute_series(const OrderedSeries& series, const MleOptions& options) {
    MleResult fit = fit_mle(series, options);
    ImputationResult out = impute_series(series, fit.params);
    out.fit = fit;
    return out;
}

std::vector<double> simulate_local_level(std::span<const double> distances, double sigma2_eps, double sigma2_eta,
                                         double initial_level, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x(distances.size());
    double level = initial_level;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (i > 0) level += std::sqrt((distances[i] - distances[i - 1]) * sigma2_eta) * z(rng);
        x[i] = level + std::sqrt(sigma2_eps) * z(rng);
    }
    return x;
}

}  // namespace spcar
