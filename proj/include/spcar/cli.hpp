#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spcar/geo_order.hpp"

namespace spcar::cli {

struct BenchSettings {
    std::size_t n_reps = 1000;
    std::vector<std::string> splits{"60/40", "70/30", "80/20"};
    std::vector<std::string> methods{"state_space", "mean", "nearest_distance", "linear_interp"};
    std::vector<std::string> variables;  // empty: the six facility covariates
    bool write_replicates = false;
};

struct McmcSettings {
    std::size_t n_burnin = 20000;
    std::size_t n_keep = 50000;
    std::size_t thin = 1;
    std::size_t n_chains = 1;
    double rho_step = 1.0;
    bool store_phi = false;
    bool standardize = false;
    double prior_a = 1.0;
    double prior_b = 0.01;
    double prior_beta_variance = 1e5;
};

/// Run configuration read from a JSON file. Relative paths resolve against
/// the file's directory.
struct RunConfig {
    std::filesystem::path facilities;
    std::filesystem::path zctas;
    std::filesystem::path adjacency;        // optional when adjacency_km is set
    std::optional<double> adjacency_km;     // distance-threshold adjacency instead of a file
    std::filesystem::path output_dir;
    LatLon centroid = kFloridaCentroid;
    double tie_epsilon_km = kDefaultTieEpsilonKm;
    double missingness_threshold = 0.8;
    BenchSettings bench;
    McmcSettings mcmc;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

/// Throws ConfigError listing every problem found.
RunConfig load_run_config(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. Returns the exit
/// status; errors are reported on `err` as a one-line JSON record.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spcar::cli
