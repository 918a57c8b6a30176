#include "spcar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "spcar/car_mcmc.hpp"
#include "spcar/error.hpp"
#include "spcar/local_level.hpp"

namespace spcar {

namespace {

struct CovariateShape {
    double mean;
    double sd;
    double lo;
    double hi;
    bool maskable;  // receives the covariate missing rate
};

// Order follows kFacilityCovariates.
constexpr std::array<CovariateShape, 6> kShapes = {{
    {45.0, 10.0, 0.0, 100.0, true},   // pct_diabetes_primary
    {30.0, 8.0, 0.0, 100.0, true},    // pct_hypertension_primary
    {30.0, 18.0, 0.0, 100.0, true},   // pct_african_american
    {12.0, 4.0, 0.0, 1e9, false},     // staff_count
    {8.0, 3.0, 0.0, 100.0, false},    // pct_septicemia
    {45.0, 5.0, 0.0, 100.0, true},    // pct_female
}};

std::vector<std::size_t> choose(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    return idx;
}

std::size_t rounded_count(double rate, std::size_t n) {
    return std::min(n, static_cast<std::size_t>(std::llround(rate * static_cast<double>(n))));
}

}  // namespace

void SimulationOptions::validate() const {
    if (k < 2) throw ConfigError("simulate: k must be >= 2");
    if (max_facilities_per_zcta < 1) throw ConfigError("simulate: max facilities per zcta must be >= 1");
    if (!(covariate_missing_rate >= 0.0 && covariate_missing_rate < 1.0))
        throw ConfigError("simulate: covariate missing rate must lie in [0, 1)");
    if (!(shr_missing_rate >= 0.0 && shr_missing_rate < 1.0))
        throw ConfigError("simulate: shr missing rate must lie in [0, 1)");
    if (beta.size() != kFacilityCovariates.size() + 2) throw ConfigError("simulate: beta needs 8 entries");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("simulate: rho must lie in [0, 1)");
    if (!(tau2 > 0.0 && nu2 > 0.0)) throw ConfigError("simulate: tau2 and nu2 must be positive");
    if (!(adjacency_km >= 0.0)) throw ConfigError("simulate: adjacency_km must be >= 0");
}

SimulatedDataset simulate_dataset(const SimulationOptions& options) {
    options.validate();
    Rng rng(options.seed);
    std::uniform_real_distribution<double> lat(25.2, 30.8);
    std::uniform_real_distribution<double> lon(-87.4, -80.1);
    std::uniform_int_distribution<long> population(2000, 60000);
    std::uniform_int_distribution<std::size_t> per_zcta(1, options.max_facilities_per_zcta);
    std::normal_distribution<double> z(0.0, 1.0);

    SimulatedDataset sim;
    Dataset& ds = sim.complete;
    for (std::size_t k = 0; k < options.k; ++k) {
        ZctaRecord rec;
        rec.zcta_id = fmt::format("{:05d}", 32001 + k);
        rec.centroid_latitude = lat(rng);
        rec.centroid_longitude = lon(rng);
        rec.population = population(rng);
        rec.fpl_score = std::clamp(15.0 + 5.0 * z(rng), 0.0, 100.0);
        ds.zctas.push_back(rec);
    }
    std::size_t next_id = 1;
    std::vector<std::size_t> zcta_of;
    for (std::size_t k = 0; k < options.k; ++k) {
        const std::size_t m = per_zcta(rng);
        for (std::size_t j = 0; j < m; ++j) {
            FacilityRecord f;
            f.facility_id = fmt::format("F{:04d}", next_id++);
            f.zcta_id = ds.zctas[k].zcta_id;
            f.latitude = ds.zctas[k].centroid_latitude;
            f.longitude = ds.zctas[k].centroid_longitude;
            f.covariates.assign(kFacilityCovariates.size(), 0.0);
            ds.facilities.push_back(std::move(f));
            zcta_of.push_back(k);
        }
    }
    const std::size_t n = ds.facilities.size();

    // Covariates: smooth fields along the distance ordering.
    std::vector<std::string> ids;
    std::vector<LatLon> sites;
    std::vector<OptionalValue> dummy(n, 0.0);
    for (const auto& f : ds.facilities) {
        ids.push_back(f.facility_id);
        sites.push_back({f.latitude, f.longitude});
    }
    OrderedSeries order = make_ordered_series(ids, sites, dummy, options.centroid);
    for (std::size_t c = 0; c < kShapes.size(); ++c) {
        const auto& shape = kShapes[c];
        auto path = simulate_local_level(order.distances, 0.2 * shape.sd * shape.sd, shape.sd * shape.sd / 200.0,
                                         shape.mean, rng);
        for (std::size_t i = 0; i < n; ++i) {
            double v = std::clamp(path[i], shape.lo, shape.hi);
            if (kFacilityCovariates[c] == "staff_count") v = std::round(v);
            ds.facilities[order.source_rows[i]].covariates[c] = v;
        }
    }

    sim.edges = threshold_edges(ds.zctas, options.adjacency_km);
    ZctaGraph graph = augment_islands(build_graph(sim.edges, ds.zctas));
    sim.phi = draw_car_prior(graph, options.rho, options.tau2, rng);

    const double nu = std::sqrt(options.nu2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = ds.facilities[i];
        const auto& zc = ds.zctas[zcta_of[i]];
        double eta = options.beta[0];
        for (std::size_t c = 0; c < kFacilityCovariates.size(); ++c) eta += options.beta[c + 1] * *f.covariates[c];
        eta += options.beta.back() * *zc.fpl_score;
        eta += std::log(static_cast<double>(zc.population));
        eta += sim.phi[static_cast<Eigen::Index>(zcta_of[i])];
        double y = eta + nu * z(rng);
        sim.log_shr.push_back(y);
        ds.facilities[i].shr = std::exp(y);
    }

    sim.dataset = ds;
    for (std::size_t c = 0; c < kShapes.size(); ++c) {
        if (!kShapes[c].maskable) continue;
        for (std::size_t i : choose(n, rounded_count(options.covariate_missing_rate, n), rng))
            sim.dataset.facilities[i].covariates[c].reset();
    }
    for (std::size_t i : choose(n, rounded_count(options.shr_missing_rate, n), rng)) sim.dataset.facilities[i].shr.reset();
    return sim;
}

void write_simulation(const std::filesystem::path& dir, const SimulatedDataset& sim, const SimulationOptions& options) {
    std::filesystem::create_directories(dir);
    write_facility_table(dir / "facilities.csv", sim.dataset.facilities);
    write_zcta_table(dir / "zctas.csv", sim.dataset.zctas);
    write_adjacency(dir / "adjacency.csv", sim.edges);

    nlohmann::ordered_json truth;
    truth["seed"] = options.seed;
    truth["k"] = options.k;
    truth["n_facilities"] = sim.dataset.facilities.size();
    truth["beta"] = options.beta;
    truth["rho"] = options.rho;
    truth["tau2"] = options.tau2;
    truth["nu2"] = options.nu2;
    truth["covariate_missing_rate"] = options.covariate_missing_rate;
    truth["shr_missing_rate"] = options.shr_missing_rate;
    truth["adjacency_km"] = options.adjacency_km;
    truth["phi"] = std::vector<double>(sim.phi.data(), sim.phi.data() + sim.phi.size());
    truth["log_shr"] = sim.log_shr;
    std::ofstream out(dir / "truth.json");
    if (!out) throw IoError("cannot write " + (dir / "truth.json").string());
    out << truth.dump(2) << '\n';
}

}  // namespace spcar
