#include "spcar/impute_bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "spcar/csv.hpp"
#include "spcar/error.hpp"

namespace spcar {

std::pair<OrderedSeries, MaskPlan> mask_random(const OrderedSeries& series, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("mask fraction must lie in (0, 1)");
    if (series.n_observed < 5)
        throw ContractError(fmt::format("masking needs at least 5 observed values, found {}", series.n_observed));

    std::vector<std::size_t> observed;
    observed.reserve(series.n_observed);
    for (std::size_t i = 0; i < series.size(); ++i)
        if (series.values[i]) observed.push_back(i);

    const auto n_mask = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(observed.size())));
    if (n_mask == 0) throw ContractError("mask fraction selects no observations");
    if (observed.size() - n_mask < 3)
        throw ContractError(fmt::format("masking {} of {} observations leaves fewer than 3", n_mask, observed.size()));

    // Partial Fisher-Yates over the observed positions.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n_mask; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, observed.size() - 1);
        std::swap(observed[i], observed[pick(rng)]);
    }
    std::vector<std::size_t> chosen(observed.begin(), observed.begin() + static_cast<std::ptrdiff_t>(n_mask));
    std::sort(chosen.begin(), chosen.end());

    MaskPlan plan;
    plan.seed = seed;
    plan.test_fraction = fraction;
    plan.heldout_indices = chosen;
    OrderedSeries masked = series;
    for (std::size_t idx : chosen) {
        plan.heldout_values.push_back(*masked.values[idx]);
        masked.values[idx].reset();
    }
    masked.n_observed -= n_mask;
    return {std::move(masked), std::move(plan)};
}

double smape(std::span<const double> actual, std::span<const double> imputed) {
    if (actual.size() != imputed.size()) throw ContractError("smape: length mismatch");
    if (actual.empty()) throw ContractError("smape: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        double denom = std::fabs(imputed[i]) + std::fabs(actual[i]);
        if (denom == 0.0) continue;
        total += std::fabs(imputed[i] - actual[i]) / denom;
    }
    return 100.0 / static_cast<double>(actual.size()) * total;
}

std::string_view to_string(ImputeMethod method) {
    switch (method) {
        case ImputeMethod::StateSpace: return "state_space";
        case ImputeMethod::Mean: return "mean";
        case ImputeMethod::NearestDistance: return "nearest_distance";
        case ImputeMethod::LinearInterp: return "linear_interp";
    }
    return "unknown";
}

ImputeMethod parse_impute_method(std::string_view name) {
    for (auto m : {ImputeMethod::StateSpace, ImputeMethod::Mean, ImputeMethod::NearestDistance,
                   ImputeMethod::LinearInterp})
        if (to_string(m) == name) return m;
    throw ConfigError(fmt::format("unknown imputation method '{}'", name));
}

std::vector<double> impute_baseline(const OrderedSeries& series, ImputeMethod method) {
    std::vector<std::size_t> obs;
    for (std::size_t i = 0; i < series.size(); ++i)
        if (series.values[i]) obs.push_back(i);
    if (obs.empty()) throw NumericalError("no observed values to impute from");

    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = series.values[i].value_or(0.0);

    switch (method) {
        case ImputeMethod::Mean: {
            double sum = 0.0;
            for (std::size_t j : obs) sum += *series.values[j];
            double mean = sum / static_cast<double>(obs.size());
            for (std::size_t i = 0; i < series.size(); ++i)
                if (!series.values[i]) out[i] = mean;
            break;
        }
        case ImputeMethod::NearestDistance:
        case ImputeMethod::LinearInterp: {
            if (method == ImputeMethod::LinearInterp && obs.size() < 2)
                throw NumericalError("linear interpolation needs at least 2 observed values");
            // obs is sorted by distance, so left/right neighbours are adjacent entries.
            std::size_t right = 0;
            for (std::size_t i = 0; i < series.size(); ++i) {
                if (series.values[i]) continue;
                while (right < obs.size() && obs[right] < i) ++right;
                const bool has_left = right > 0;
                const bool has_right = right < obs.size();
                const double d = series.distances[i];
                if (!has_left) {
                    out[i] = *series.values[obs[right]];
                } else if (!has_right) {
                    out[i] = *series.values[obs[right - 1]];
                } else {
                    std::size_t l = obs[right - 1];
                    std::size_t r = obs[right];
                    double dl = d - series.distances[l];
                    double dr = series.distances[r] - d;
                    if (method == ImputeMethod::NearestDistance) {
                        out[i] = dl <= dr ? *series.values[l] : *series.values[r];
                    } else {
                        double w = dl / (dl + dr);
                        out[i] = (1.0 - w) * *series.values[l] + w * *series.values[r];
                    }
                }
            }
            break;
        }
        case ImputeMethod::StateSpace:
            throw ContractError("state_space is not a baseline method");
    }
    return out;
}

std::vector<double> impute_with(const OrderedSeries& series, ImputeMethod method, const MleOptions& mle) {
    if (method == ImputeMethod::StateSpace) return impute_series(series, mle).values;
    return impute_baseline(series, method);
}

std::uint64_t hash64(std::uint64_t master_seed, std::uint64_t replicate) {
    std::uint64_t z = master_seed + (replicate + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<Split> default_splits() { return {{"60/40", 0.4}, {"70/30", 0.3}, {"80/20", 0.2}}; }

Split parse_split(std::string_view label) {
    auto slash = label.find('/');
    if (slash == std::string_view::npos) throw ConfigError(fmt::format("split '{}' must look like 80/20", label));
    double train = csv::parse_real(label.substr(0, slash), 0, "split");
    double test = csv::parse_real(label.substr(slash + 1), 0, "split");
    if (!(train > 0.0 && test > 0.0)) throw ConfigError(fmt::format("split '{}' must have positive parts", label));
    return {std::string(label), test / (train + test)};
}

namespace {

struct Summary {
    double mean = 0.0;
    double sd = 0.0;
};

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

}  // namespace

std::vector<BenchmarkReport> run_benchmark(const OrderedSeries& series, const BenchmarkOptions& options) {
    if (options.n_reps < 1) throw ContractError("n_reps must be >= 1");
    if (options.methods.empty() || options.splits.empty()) throw ContractError("benchmark needs methods and splits");
    for (const auto& s : options.splits)
        if (!(s.test_fraction > 0.0 && s.test_fraction < 1.0))
            throw ContractError(fmt::format("split '{}' has invalid test fraction", s.label));

    const std::size_t n_methods = options.methods.size();
    const std::size_t n_tasks = options.splits.size() * options.n_reps;
    // scores[task * n_methods + method]
    std::vector<std::optional<double>> scores(n_tasks * n_methods);

    auto run_task = [&](std::size_t task) {
        const std::size_t split = task / options.n_reps;
        const std::size_t rep = task % options.n_reps;
        std::optional<std::pair<OrderedSeries, MaskPlan>> masked;
        try {
            masked = mask_random(series, options.splits[split].test_fraction, hash64(options.master_seed, rep));
        } catch (const Error&) {
            return;
        }
        const auto& [train, plan] = *masked;
        std::vector<double> predicted(plan.heldout_indices.size());
        for (std::size_t m = 0; m < n_methods; ++m) {
            try {
                auto imputed = impute_with(train, options.methods[m], options.mle);
                for (std::size_t h = 0; h < plan.heldout_indices.size(); ++h)
                    predicted[h] = imputed[plan.heldout_indices[h]];
                double score = smape(plan.heldout_values, predicted);
                if (std::isfinite(score)) scores[task * n_methods + m] = score;
            } catch (const Error&) {
                // recorded as a failed replicate
            }
        }
    };

    const unsigned n_threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_tasks)));
    if (n_threads == 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < n_threads; ++w)
            workers.emplace_back([&] {
                for (std::size_t t = next++; t < n_tasks; t = next++) run_task(t);
            });
    }

    std::vector<BenchmarkReport> reports;
    for (std::size_t m = 0; m < n_methods; ++m) {
        for (std::size_t s = 0; s < options.splits.size(); ++s) {
            BenchmarkReport report;
            report.method = std::string(to_string(options.methods[m]));
            report.split = options.splits[s].label;
            for (std::size_t r = 0; r < options.n_reps; ++r) {
                const auto& score = scores[(s * options.n_reps + r) * n_methods + m];
                if (score) {
                    report.scores.push_back(*score);
                    report.replicate_index.push_back(r);
                } else {
                    ++report.n_failed;
                }
            }
            report.n_reps = report.scores.size();
            Summary sum = summarize(report.scores);
            report.mean_smape = sum.mean;
            report.sd_smape = sum.sd;
            reports.push_back(std::move(report));
        }
    }
    return reports;
}

void write_benchmark_csv(const std::filesystem::path& path, std::span<const VariableBenchmark> results) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "variable,method,split,n_reps,mean_smape,sd_smape,mean_smape_fraction,n_failed\n";
    for (const auto& vb : results)
        for (const auto& r : vb.reports)
            out << fmt::format("{},{},{},{},{},{},{},{}\n", vb.variable, r.method, r.split, r.n_reps,
                               csv::format_real(r.mean_smape), csv::format_real(r.sd_smape),
                               csv::format_real(r.mean_smape_fraction()), r.n_failed);
    if (!out) throw IoError("write failed: " + path.string());
}

void write_replicates_csv(const std::filesystem::path& path, std::span<const VariableBenchmark> results) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "variable,method,split,replicate,smape\n";
    for (const auto& vb : results)
        for (const auto& r : vb.reports)
            for (std::size_t i = 0; i < r.scores.size(); ++i)
                out << fmt::format("{},{},{},{},{}\n", vb.variable, r.method, r.split, r.replicate_index[i],
                                   csv::format_real(r.scores[i]));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spcar
