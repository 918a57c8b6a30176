#include "spcar/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "spcar/car_mcmc.hpp"
#include "spcar/csv.hpp"
#include "spcar/data_model.hpp"
#include "spcar/error.hpp"
#include "spcar/geo_order.hpp"
#include "spcar/impute_bench.hpp"
#include "spcar/local_level.hpp"
#include "spcar/report.hpp"
#include "spcar/simulate.hpp"
#include "spcar/zcta_graph.hpp"

namespace spcar::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

template <typename T>
void read_key(const json& obj, std::string_view key, T& target, std::vector<std::string>& problems,
              std::string_view scope = {}) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        target = it->template get<T>();
    } catch (const json::exception&) {
        problems.push_back(fmt::format("{}{}: wrong type", scope, key));
    }
}

void check_known_keys(const json& obj, std::initializer_list<std::string_view> known, std::vector<std::string>& problems,
                      std::string_view scope = {}) {
    for (const auto& [key, value] : obj.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            problems.push_back(fmt::format("{}{}: unknown key", scope, key));
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config {} is not valid JSON: {}", path.string(), e.what()));
    }
    if (!doc.is_object()) throw ConfigError("config root must be an object");

    std::vector<std::string> problems;
    check_known_keys(doc,
                     {"facilities", "zctas", "adjacency", "adjacency_km", "output_dir", "centroid_lat", "centroid_lon",
                      "tie_epsilon_km", "missingness_threshold", "bench", "mcmc", "seed", "threads"},
                     problems);
    const fs::path base = path.parent_path();
    RunConfig cfg;
    std::string facilities, zctas, adjacency, output_dir;
    read_key(doc, "facilities", facilities, problems);
    read_key(doc, "zctas", zctas, problems);
    read_key(doc, "adjacency", adjacency, problems);
    read_key(doc, "output_dir", output_dir, problems);
    if (doc.contains("adjacency_km")) {
        double km = 0.0;
        read_key(doc, "adjacency_km", km, problems);
        cfg.adjacency_km = km;
    }
    read_key(doc, "centroid_lat", cfg.centroid.lat, problems);
    read_key(doc, "centroid_lon", cfg.centroid.lon, problems);
    read_key(doc, "tie_epsilon_km", cfg.tie_epsilon_km, problems);
    read_key(doc, "missingness_threshold", cfg.missingness_threshold, problems);
    read_key(doc, "threads", cfg.threads, problems);
    if (doc.contains("seed")) {
        std::uint64_t seed = 0;
        read_key(doc, "seed", seed, problems);
        cfg.seed = seed;
    }

    if (auto it = doc.find("bench"); it != doc.end()) {
        if (!it->is_object()) {
            problems.push_back("bench: must be an object");
        } else {
            check_known_keys(*it, {"n_reps", "splits", "methods", "variables", "write_replicates"}, problems, "bench.");
            read_key(*it, "n_reps", cfg.bench.n_reps, problems, "bench.");
            read_key(*it, "splits", cfg.bench.splits, problems, "bench.");
            read_key(*it, "methods", cfg.bench.methods, problems, "bench.");
            read_key(*it, "variables", cfg.bench.variables, problems, "bench.");
            read_key(*it, "write_replicates", cfg.bench.write_replicates, problems, "bench.");
        }
    }
    if (auto it = doc.find("mcmc"); it != doc.end()) {
        if (!it->is_object()) {
            problems.push_back("mcmc: must be an object");
        } else {
            check_known_keys(*it,
                             {"n_burnin", "n_keep", "thin", "n_chains", "rho_step", "store_phi", "standardize",
                              "prior_a", "prior_b", "prior_beta_variance"},
                             problems, "mcmc.");
            auto& m = cfg.mcmc;
            read_key(*it, "n_burnin", m.n_burnin, problems, "mcmc.");
            read_key(*it, "n_keep", m.n_keep, problems, "mcmc.");
            read_key(*it, "thin", m.thin, problems, "mcmc.");
            read_key(*it, "n_chains", m.n_chains, problems, "mcmc.");
            read_key(*it, "rho_step", m.rho_step, problems, "mcmc.");
            read_key(*it, "store_phi", m.store_phi, problems, "mcmc.");
            read_key(*it, "standardize", m.standardize, problems, "mcmc.");
            read_key(*it, "prior_a", m.prior_a, problems, "mcmc.");
            read_key(*it, "prior_b", m.prior_b, problems, "mcmc.");
            read_key(*it, "prior_beta_variance", m.prior_beta_variance, problems, "mcmc.");
        }
    }

    cfg.facilities = resolve(base, facilities);
    cfg.zctas = resolve(base, zctas);
    cfg.adjacency = resolve(base, adjacency);
    cfg.output_dir = resolve(base, output_dir);

    if (facilities.empty()) problems.push_back("facilities: required");
    if (zctas.empty()) problems.push_back("zctas: required");
    if (output_dir.empty()) problems.push_back("output_dir: required");
    if (cfg.adjacency_km && !(*cfg.adjacency_km >= 0.0)) problems.push_back("adjacency_km: must be >= 0");
    {
        std::vector<fs::path> paths;
        for (const auto& p : {cfg.facilities, cfg.zctas, cfg.adjacency, cfg.output_dir})
            if (!p.empty()) paths.push_back(p.lexically_normal());
        for (std::size_t i = 0; i < paths.size(); ++i)
            for (std::size_t j = i + 1; j < paths.size(); ++j)
                if (paths[i] == paths[j]) problems.push_back(fmt::format("paths: '{}' referenced twice", paths[i].string()));
    }
    if (!(cfg.centroid.lat >= -90.0 && cfg.centroid.lat <= 90.0)) problems.push_back("centroid_lat: out of range");
    if (!(cfg.centroid.lon >= -180.0 && cfg.centroid.lon <= 180.0)) problems.push_back("centroid_lon: out of range");
    if (!(cfg.tie_epsilon_km > 0.0)) problems.push_back("tie_epsilon_km: must be positive");
    if (!(cfg.missingness_threshold >= 0.0 && cfg.missingness_threshold <= 1.0))
        problems.push_back("missingness_threshold: must lie in [0, 1]");
    if (cfg.threads < 1) problems.push_back("threads: must be >= 1");
    if (cfg.bench.n_reps < 1) problems.push_back("bench.n_reps: must be >= 1");
    for (const auto& s : cfg.bench.splits) {
        try {
            parse_split(s);
        } catch (const Error& e) {
            problems.push_back(fmt::format("bench.splits: {}", e.what()));
        }
    }
    for (const auto& m : cfg.bench.methods) {
        try {
            parse_impute_method(m);
        } catch (const Error& e) {
            problems.push_back(fmt::format("bench.methods: {}", e.what()));
        }
    }
    const auto& m = cfg.mcmc;
    if (m.n_burnin < 1 || m.n_keep < 1 || m.thin < 1 || m.n_chains < 1)
        problems.push_back("mcmc: counts must be >= 1");
    if (!(m.rho_step > 0.0)) problems.push_back("mcmc.rho_step: must be positive");
    if (!(m.prior_a > 0.0 && m.prior_b > 0.0)) problems.push_back("mcmc.prior_a/prior_b: must be positive");
    if (!(m.prior_beta_variance > 0.0)) problems.push_back("mcmc.prior_beta_variance: must be positive");

    if (!problems.empty())
        throw ConfigError(fmt::format("invalid config {}: {}", path.string(), fmt::join(problems, "; ")));
    return cfg;
}

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<unsigned> threads_flag;
    bool from_imputed = false;
};

struct Context {
    RunConfig cfg;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

Context make_context(const Common& common) {
    Context ctx;
    ctx.cfg = load_run_config(common.config_path);
    if (common.seed_flag) {
        ctx.seed = *common.seed_flag;
    } else if (const char* env = std::getenv("ARTIFACT_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            ctx.seed = std::stoull(env, &used);
            if (used != std::string_view(env).size()) throw std::invalid_argument(env);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("ARTIFACT_SEED '{}' is not an unsigned integer", env));
        }
    } else if (ctx.cfg.seed) {
        ctx.seed = *ctx.cfg.seed;
    } else {
        throw ConfigError("seed: required (config key, ARTIFACT_SEED, or --seed)");
    }
    ctx.threads = common.threads_flag.value_or(ctx.cfg.threads);
    fs::create_directories(ctx.cfg.output_dir);
    return ctx;
}

fs::path completed_facilities(const RunConfig& cfg) { return cfg.output_dir / "completed_facilities.csv"; }
fs::path completed_zctas(const RunConfig& cfg) { return cfg.output_dir / "completed_zctas.csv"; }

Dataset load_inputs(const RunConfig& cfg, bool from_imputed) {
    if (from_imputed) return load_dataset(completed_facilities(cfg), completed_zctas(cfg));
    return load_dataset(cfg.facilities, cfg.zctas);
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

std::pair<double, double> variable_bounds(std::string_view name) {
    if (name == "staff_count" || name == kFplScore) return {0.0, std::numeric_limits<double>::infinity()};
    return {0.0, 100.0};
}

std::vector<std::string> bench_variables(const RunConfig& cfg) {
    if (!cfg.bench.variables.empty()) return cfg.bench.variables;
    return Dataset::default_covariate_names();
}

ZctaGraph load_graph(const RunConfig& cfg, const DesignTable& table, const Dataset& ds) {
    std::vector<Edge> edges;
    if (!cfg.adjacency.empty()) {
        edges = load_adjacency(cfg.adjacency);
    } else if (cfg.adjacency_km) {
        edges = threshold_edges(ds.zctas, *cfg.adjacency_km);
    } else {
        throw ConfigError("adjacency: required unless adjacency_km is set");
    }
    auto ids = graph_node_ids(table, ds.zctas);
    return augment_islands(build_graph(edges, ds.zctas, ids));
}

int cmd_impute(const Common& common, std::ostream& out) {
    Context ctx = make_context(common);
    const RunConfig& cfg = ctx.cfg;
    Dataset raw = load_dataset(cfg.facilities, cfg.zctas);
    ScreenResult screened = screen_missingness(raw, cfg.missingness_threshold);
    Dataset ds = screened.dataset;
    DesignTable table = join_zcta(ds);
    const std::size_t missing_before = table.missing_cells();

    std::ofstream diag(cfg.output_dir / "impute_diagnostics.csv");
    if (!diag) throw IoError("cannot write impute diagnostics");
    diag << "variable,n_sites,n_missing,sigma2_eps,sigma2_eta,log_likelihood,converged,warning,mean_smoothed_variance\n";
    auto log_diag = [&](std::string_view name, const OrderedSeries& s, const ImputationResult& r) {
        double mean_var = 0.0;
        for (double v : r.imputed_variances) mean_var += v;
        if (!r.imputed_variances.empty()) mean_var /= static_cast<double>(r.imputed_variances.size());
        diag << fmt::format("{},{},{},{},{},{},{},{},{}\n", name, s.size(), s.size() - s.n_observed,
                            csv::format_real(r.fit.params.sigma2_eps), csv::format_real(r.fit.params.sigma2_eta),
                            csv::format_real(r.fit.log_likelihood), r.fit.converged ? 1 : 0, r.fit.warning ? 1 : 0,
                            csv::format_real(mean_var));
    };

    for (std::size_t c = 0; c < kFacilityCovariates.size(); ++c) {
        const std::string name(kFacilityCovariates[c]);
        OrderedSeries s = make_ordered_series(table, name, cfg.centroid, cfg.tie_epsilon_km);
        if (s.n_observed == s.size()) continue;
        ImputationResult r = impute_series(s);
        auto [lo, hi] = variable_bounds(name);
        for (std::size_t pos : r.imputed_positions)
            ds.facilities[s.source_rows[pos]].covariates[c] = std::clamp(r.values[pos], lo, hi);
        log_diag(name, s, r);
    }

    // fpl_score lives on ZCTAs: impute over the centroids of ZCTAs hosting facilities.
    {
        auto ids = graph_node_ids(table, ds.zctas);
        std::unordered_map<std::string_view, std::size_t> pos;
        for (std::size_t z = 0; z < ds.zctas.size(); ++z) pos.emplace(ds.zctas[z].zcta_id, z);
        std::vector<LatLon> sites;
        std::vector<OptionalValue> values;
        for (const auto& id : ids) {
            const auto& z = ds.zctas[pos.at(id)];
            sites.push_back({z.centroid_latitude, z.centroid_longitude});
            values.push_back(z.fpl_score);
        }
        OrderedSeries s = make_ordered_series(ids, sites, values, cfg.centroid, cfg.tie_epsilon_km);
        if (s.n_observed < s.size()) {
            ImputationResult r = impute_series(s);
            for (std::size_t p : r.imputed_positions)
                ds.zctas[pos.at(ids[s.source_rows[p]])].fpl_score = std::max(r.values[p], 0.0);
            log_diag(kFplScore, s, r);
        }
    }

    write_facility_table(completed_facilities(cfg), ds.facilities);
    write_zcta_table(completed_zctas(cfg), ds.zctas);
    const std::size_t missing_after = join_zcta(ds).missing_cells();

    json manifest;
    manifest["command"] = "impute";
    manifest["seed"] = ctx.seed;
    manifest["facilities_loaded"] = raw.facilities.size();
    manifest["facilities_kept"] = screened.kept;
    manifest["facilities_removed"] = screened.removed;
    manifest["missingness_threshold"] = cfg.missingness_threshold;
    manifest["missing_cells_before"] = missing_before;
    manifest["missing_cells_after"] = missing_after;
    write_json(cfg.output_dir / "manifest_impute.json", manifest);
    out << fmt::format("impute: {} facilities kept ({} removed), {} missing cells filled\n", screened.kept,
                       screened.removed, missing_before - missing_after);
    return 0;
}

int cmd_bench(const Common& common, std::optional<std::size_t> reps_flag, std::ostream& out) {
    Context ctx = make_context(common);
    const RunConfig& cfg = ctx.cfg;
    Dataset ds = screen_missingness(load_dataset(cfg.facilities, cfg.zctas), cfg.missingness_threshold).dataset;
    DesignTable table = join_zcta(ds);

    BenchmarkOptions opts;
    opts.n_reps = reps_flag.value_or(cfg.bench.n_reps);
    opts.master_seed = ctx.seed;
    opts.threads = ctx.threads;
    opts.methods.clear();
    for (const auto& m : cfg.bench.methods) opts.methods.push_back(parse_impute_method(m));
    opts.splits.clear();
    for (const auto& s : cfg.bench.splits) opts.splits.push_back(parse_split(s));

    std::vector<VariableBenchmark> results;
    json skipped = json::array();
    for (const auto& var : bench_variables(cfg)) {
        OrderedSeries s = make_ordered_series(table, var, cfg.centroid, cfg.tie_epsilon_km);
        if (s.n_observed < 5) {
            skipped.push_back(var);
            continue;
        }
        results.push_back({var, run_benchmark(s, opts)});
    }
    write_benchmark_csv(cfg.output_dir / "benchmark.csv", results);
    if (cfg.bench.write_replicates) write_replicates_csv(cfg.output_dir / "benchmark_replicates.csv", results);

    json manifest;
    manifest["command"] = "bench";
    manifest["seed"] = ctx.seed;
    manifest["n_reps"] = opts.n_reps;
    manifest["splits"] = cfg.bench.splits;
    manifest["methods"] = cfg.bench.methods;
    json vars = json::array();
    for (const auto& r : results) vars.push_back(r.variable);
    manifest["variables"] = vars;
    manifest["skipped_variables"] = skipped;
    json executed = json::array();
    for (const auto& vb : results)
        for (const auto& r : vb.reports)
            executed.push_back({{"variable", vb.variable}, {"method", r.method}, {"split", r.split},
                                {"replicates_run", r.n_reps + r.n_failed}, {"replicates_failed", r.n_failed}});
    manifest["runs"] = executed;
    write_json(cfg.output_dir / "manifest_bench.json", manifest);
    out << fmt::format("bench: {} variables x {} methods x {} splits x {} replicates\n", results.size(),
                       opts.methods.size(), opts.splits.size(), opts.n_reps);
    return 0;
}

int cmd_graph(const Common& common, std::ostream& out) {
    Context ctx = make_context(common);
    const RunConfig& cfg = ctx.cfg;
    Dataset ds = screen_missingness(load_inputs(cfg, common.from_imputed), cfg.missingness_threshold).dataset;
    DesignTable table = join_zcta(ds);
    ZctaGraph g = load_graph(cfg, table, ds);

    {
        std::ofstream nodes(cfg.output_dir / "graph_nodes.csv");
        if (!nodes) throw IoError("cannot write graph_nodes.csv");
        nodes << "zcta_id,degree\n";
        for (std::size_t k = 0; k < g.size(); ++k) nodes << g.ids()[k] << ',' << g.degrees()[k] << '\n';
    }
    {
        std::ofstream ev(cfg.output_dir / "graph_eigenvalues.csv");
        if (!ev) throw IoError("cannot write graph_eigenvalues.csv");
        ev << "index,eigenvalue\n";
        for (std::size_t m = 0; m < g.laplacian_eigenvalues().size(); ++m)
            ev << m << ',' << csv::format_real(g.laplacian_eigenvalues()[m]) << '\n';
    }
    write_adjacency(cfg.output_dir / "augmented_edges.csv", g.augmented_edges());

    json manifest;
    manifest["command"] = "graph";
    manifest["seed"] = ctx.seed;
    manifest["nodes"] = g.size();
    manifest["edges"] = g.edge_count();
    manifest["augmented_edges"] = g.augmented_edges().size();
    manifest["min_degree"] = g.size() ? *std::min_element(g.degrees().begin(), g.degrees().end()) : 0;
    manifest["smallest_eigenvalue"] = g.laplacian_eigenvalues().empty() ? 0.0 : g.laplacian_eigenvalues().front();
    write_json(cfg.output_dir / "manifest_graph.json", manifest);
    out << fmt::format("graph: {} nodes, {} edges ({} added by island repair)\n", g.size(), g.edge_count(),
                       g.augmented_edges().size());
    return 0;
}

struct FitFlags {
    std::optional<std::size_t> burnin;
    std::optional<std::size_t> keep;
    std::optional<std::size_t> thin;
    std::optional<std::size_t> chains;
};

int cmd_fit(const Common& common, const FitFlags& flags, std::ostream& out) {
    Context ctx = make_context(common);
    const RunConfig& cfg = ctx.cfg;
    Dataset ds = screen_missingness(load_inputs(cfg, common.from_imputed), cfg.missingness_threshold).dataset;
    DesignTable table = join_zcta(ds);
    auto graph = std::make_shared<const ZctaGraph>(load_graph(cfg, table, ds));
    CarModelInput input = make_car_input(table, graph, cfg.mcmc.standardize);

    Priors priors = Priors::defaults(input.n_coef());
    priors.sigma_beta *= cfg.mcmc.prior_beta_variance / 1e5;
    priors.a = cfg.mcmc.prior_a;
    priors.b = cfg.mcmc.prior_b;
    CarModel model(input, priors);

    McmcConfig mc;
    mc.n_burnin = flags.burnin.value_or(cfg.mcmc.n_burnin);
    mc.n_keep = flags.keep.value_or(cfg.mcmc.n_keep);
    mc.thin = flags.thin.value_or(cfg.mcmc.thin);
    mc.n_chains = flags.chains.value_or(cfg.mcmc.n_chains);
    mc.rho_step = cfg.mcmc.rho_step;
    mc.store_phi = cfg.mcmc.store_phi;
    mc.seed = ctx.seed;
    mc.threads = ctx.threads;
    Chains chains = run_mcmc(model, mc);
    PosteriorSummary summary = summarize_posterior(chains);

    write_chains_csv(cfg.output_dir / "chains.csv", chains);
    write_phi_csv(cfg.output_dir / "phi.csv", chains, *graph);
    write_summary_csv(cfg.output_dir / "summary.csv", summary);
    write_fitted_csv(cfg.output_dir / "fitted.csv", model.input(), summary.fitted, graph->ids());

    std::optional<double> rse_value;
    std::string rse_note;
    try {
        rse_value = observed_rse(model.input(), summary.fitted);
    } catch (const NumericalError& e) {
        rse_note = e.what();
    }
    {
        std::ofstream rse_out(cfg.output_dir / "rse.txt");
        if (!rse_out) throw IoError("cannot write rse.txt");
        rse_out << (rse_value ? csv::format_real(*rse_value) : "NA " + rse_note) << '\n';
    }

    json manifest;
    manifest["command"] = "fit";
    manifest["seed"] = ctx.seed;
    manifest["chains"] = chains.manifest.chains;
    manifest["burnin_iterations"] = chains.manifest.burnin_iterations;
    manifest["sampling_iterations"] = chains.manifest.sampling_iterations;
    manifest["thin"] = mc.thin;
    manifest["retained_draws"] = chains.manifest.retained_draws;
    manifest["rho_acceptance_burnin"] = chains.manifest.rho_acceptance_burnin;
    manifest["rho_acceptance_sampling"] = chains.manifest.rho_acceptance_sampling;
    manifest["rho_step"] = chains.manifest.rho_step;
    manifest["n_rows"] = model.input().n();
    manifest["n_missing_responses"] = model.missing_rows().size();
    manifest["n_zctas"] = graph->size();
    manifest["rse"] = rse_value ? json(*rse_value) : json(nullptr);
    write_json(cfg.output_dir / "manifest_fit.json", manifest);
    out << fmt::format("fit: {} burn-in + {} sampling iterations, {} draws retained, RSE {}\n",
                       chains.manifest.burnin_iterations, chains.manifest.sampling_iterations,
                       chains.manifest.retained_draws, rse_value ? csv::format_real(*rse_value) : "NA");
    return 0;
}

int cmd_export(const Common& common, std::ostream& out) {
    Context ctx = make_context(common);
    const RunConfig& cfg = ctx.cfg;
    Dataset ds = screen_missingness(load_inputs(cfg, common.from_imputed), cfg.missingness_threshold).dataset;
    DesignTable table = join_zcta(ds);

    std::vector<double> fitted;
    const fs::path fitted_path = cfg.output_dir / "fitted.csv";
    if (fs::exists(fitted_path)) {
        auto t = csv::read_file(fitted_path, {"facility_id", "zcta_id", "observed_log_shr", "fitted_log_shr"});
        std::unordered_map<std::string, double> by_id;
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            by_id[t.rows[r][0]] = csv::parse_real(t.rows[r][3], t.line_numbers[r], "fitted_log_shr");
        for (const auto& row : table.rows) {
            auto it = by_id.find(row.facility_id);
            if (it == by_id.end()) throw ValidationError("fitted.csv lacks facility " + row.facility_id);
            fitted.push_back(it->second);
        }
    }
    export_zcta_aggregates(table, ds.zctas, fitted, cfg.output_dir / "zcta_aggregates.csv");
    out << fmt::format("export-maps: {} ZCTAs written{}\n", graph_node_ids(table, ds.zctas).size(),
                       fitted.empty() ? " (no fitted values found)" : "");
    return 0;
}

int cmd_simulate(const SimulationOptions& opts, const fs::path& dir, std::ostream& out) {
    SimulatedDataset sim = simulate_dataset(opts);
    write_simulation(dir, sim, opts);
    json cfg;
    cfg["facilities"] = "facilities.csv";
    cfg["zctas"] = "zctas.csv";
    cfg["adjacency"] = "adjacency.csv";
    cfg["output_dir"] = "results";
    cfg["centroid_lat"] = opts.centroid.lat;
    cfg["centroid_lon"] = opts.centroid.lon;
    cfg["seed"] = opts.seed;
    write_json(dir / "config.json", cfg);
    out << fmt::format("simulate: {} facilities in {} ZCTAs written to {}\n", sim.dataset.facilities.size(),
                       sim.dataset.zctas.size(), dir.string());
    return 0;
}

void error_record(std::ostream& err, std::string_view command, std::string_view kind, std::string_view message) {
    json rec;
    rec["status"] = "error";
    rec["command"] = command;
    rec["kind"] = kind;
    rec["message"] = message;
    err << rec.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatial state-space imputation and two-level CAR modelling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    Common common;
    auto add_common = [&](CLI::App* sub, bool imputed_flag) {
        sub->add_option("--config,-c", common.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed_flag, "master seed (overrides ARTIFACT_SEED and config)");
        sub->add_option("--threads", common.threads_flag, "worker thread cap")->check(CLI::PositiveNumber);
        if (imputed_flag)
            sub->add_flag("--from-imputed", common.from_imputed,
                          "read completed_facilities.csv / completed_zctas.csv from the output directory");
    };

    auto* impute = app.add_subcommand("impute", "state-space imputation of every covariate");
    add_common(impute, false);

    std::optional<std::size_t> reps;
    auto* bench = app.add_subcommand("bench", "cross-validated imputation benchmark");
    add_common(bench, false);
    bench->add_option("--reps", reps, "replicates per split")->check(CLI::PositiveNumber);

    auto* graph = app.add_subcommand("graph", "build and repair the ZCTA neighbourhood graph");
    add_common(graph, true);

    FitFlags fit_flags;
    auto* fit = app.add_subcommand("fit", "MCMC fit of the two-level CAR model");
    add_common(fit, true);
    fit->add_option("--burnin", fit_flags.burnin)->check(CLI::PositiveNumber);
    fit->add_option("--keep", fit_flags.keep)->check(CLI::PositiveNumber);
    fit->add_option("--thin", fit_flags.thin)->check(CLI::PositiveNumber);
    fit->add_option("--chains", fit_flags.chains)->check(CLI::PositiveNumber);

    auto* export_maps = app.add_subcommand("export-maps", "per-ZCTA averages for choropleths");
    add_common(export_maps, true);

    SimulationOptions sim_opts;
    std::string sim_dir;
    auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset");
    simulate->add_option("--out,-o", sim_dir, "output directory")->required();
    simulate->add_option("--k", sim_opts.k, "number of ZCTAs")->capture_default_str();
    simulate->add_option("--seed", sim_opts.seed)->capture_default_str();
    simulate->add_option("--max-per-zcta", sim_opts.max_facilities_per_zcta)->capture_default_str();
    simulate->add_option("--beta", sim_opts.beta, "intercept, six covariates, fpl_score")->delimiter(',');
    simulate->add_option("--rho", sim_opts.rho)->capture_default_str();
    simulate->add_option("--tau2", sim_opts.tau2)->capture_default_str();
    simulate->add_option("--nu2", sim_opts.nu2)->capture_default_str();
    simulate->add_option("--missing-rate", sim_opts.covariate_missing_rate)->capture_default_str();
    simulate->add_option("--shr-missing-rate", sim_opts.shr_missing_rate)->capture_default_str();
    simulate->add_option("--adjacency-km", sim_opts.adjacency_km)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << "0.1.0\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        error_record(err, "", "usage", e.what());
        return 2;
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*impute) return cmd_impute(common, out);
        if (*bench) return cmd_bench(common, reps, out);
        if (*graph) return cmd_graph(common, out);
        if (*fit) return cmd_fit(common, fit_flags, out);
        if (*export_maps) return cmd_export(common, out);
        if (*simulate) return cmd_simulate(sim_opts, sim_dir, out);
    } catch (const Error& e) {
        error_record(err, command, to_string(e.kind()), e.what());
        return 1;
    } catch (const std::exception& e) {
        error_record(err, command, "internal", e.what());
        return 1;
    }
    error_record(err, command, "usage", "unknown command");
    return 2;
}

}  // namespace spcar::cli
