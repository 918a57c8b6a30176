#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "spcar/cli.hpp"
#include "spcar/csv.hpp"
#include "spcar/error.hpp"
#include "spcar/report.hpp"

using namespace spcar;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int status;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "spcar");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

struct EnvGuard {
    EnvGuard() { ::unsetenv("ARTIFACT_SEED"); }
    ~EnvGuard() { ::unsetenv("ARTIFACT_SEED"); }
};

DesignRow row(std::string fid, std::string zid, std::vector<OptionalValue> cov, OptionalValue shr) {
    DesignRow r;
    r.facility_id = std::move(fid);
    r.zcta_id = std::move(zid);
    r.covariates = std::move(cov);
    r.shr = shr;
    return r;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    std::ofstream(p) << j.dump(2);
}

}  // namespace

TEST_CASE("rse examples") {
    std::vector<double> y{1.0, 3.0, 2.0, 6.0, 5.0};
    std::vector<std::size_t> z{0, 0, 1, 1, 2};
    CHECK(rse(y, y, z) == 0.0);

    // persistence: the within-ZCTA mean
    std::vector<double> persist{2.0, 2.0, 4.0, 4.0, 5.0};
    CHECK(rse(y, persist, z) == 1.0);

    std::vector<double> shifted{2.0, 4.0, 3.0, 7.0, 5.0};
    CHECK(rse(y, shifted, z) == doctest::Approx(4.0 / 10.0).epsilon(1e-14));

    std::vector<double> flat{1.0, 1.0, 2.0};
    std::vector<std::size_t> zf{0, 0, 1};
    CHECK_THROWS_WITH_AS(rse(flat, flat, zf), "persistence baseline degenerate", NumericalError);
    std::vector<double> short_fit{1.0};
    CHECK_THROWS_AS(rse(y, short_fit, z), ContractError);
}

TEST_CASE("zcta aggregates average facility values") {
    oracle::TempDir dir("agg");
    std::vector<ZctaRecord> zctas{{"33101", 25.7, -80.2, 1000, 2.0}, {"33102", 25.8, -80.1, 500, 3.0},
                                  {"33103", 25.9, -80.0, 200, 4.0}};
    DesignTable t;
    t.variable_names = {"x", "fpl_score"};
    t.rows.push_back(row("F1", "33101", {0.2, 2.0}, 1.0));
    t.rows.push_back(row("F2", "33101", {0.4, 2.0}, std::exp(2.0)));
    t.rows.push_back(row("F3", "33102", {{}, 3.0}, {}));
    std::vector<double> fitted{0.1, 0.3, -1.5};
    export_zcta_aggregates(t, zctas, fitted, dir.path / "agg.csv");
    auto doc = csv::read_file(dir.path / "agg.csv");
    REQUIRE(doc.rows.size() == 2);
    CHECK(doc.header == std::vector<std::string>{"zcta_id", "n_facilities", "x", "fpl_score", "observed_log_shr",
                                                 "fitted_log_shr"});
    const auto& r0 = doc.rows[0];
    CHECK(r0[0] == "33101");
    CHECK(r0[1] == "2");
    CHECK(std::stod(r0[2]) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(std::stod(r0[3]) == 2.0);
    CHECK(std::stod(r0[4]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::stod(r0[5]) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(doc.rows[1] == std::vector<std::string>{"33102", "1", "NA", "3", "NA", "-1.5"});
}

TEST_CASE("car design refuses missing cells") {
    std::vector<ZctaRecord> zctas{{"1", 25.7, -80.2, 1000, 2.0}, {"2", 25.8, -80.1, 500, 3.0}};
    DesignTable t;
    t.variable_names = {"x", "fpl_score"};
    t.rows.push_back(row("F1", "1", {0.2, 2.0}, 1.0));
    t.rows.push_back(row("F2", "2", {{}, 3.0}, 2.0));
    auto g = std::make_shared<const ZctaGraph>(ZctaGraph::from_neighbors({"1", "2"}, {{1}, {0}}));
    CHECK_THROWS_AS(make_car_input(t, g), ValidationError);
    t.rows[1].covariates[0] = 0.5;
    t.rows[1].shr.reset();
    auto in = make_car_input(t, g);
    CHECK(in.X.cols() == 3);
    CHECK(in.missing == std::vector<bool>{false, true});
    CHECK(in.y[0] == 0.0);
    CHECK(in.zcta_index == std::vector<std::size_t>{0, 1});
}

TEST_CASE("simulate is reproducible") {
    EnvGuard env;
    oracle::TempDir dir("sim");
    auto a = run_cli({"simulate", "--out", (dir.path / "a").string(), "--seed", "5", "--k", "30"});
    auto b = run_cli({"simulate", "--out", (dir.path / "b").string(), "--seed", "5", "--k", "30"});
    REQUIRE(a.status == 0);
    REQUIRE(b.status == 0);
    for (const char* f : {"facilities.csv", "zctas.csv", "adjacency.csv", "config.json"})
        CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
    auto c = run_cli({"simulate", "--out", (dir.path / "c").string(), "--seed", "6", "--k", "30"});
    CHECK(slurp(dir.path / "a" / "facilities.csv") != slurp(dir.path / "c" / "facilities.csv"));
}

TEST_CASE("impute leaves no missing cells") {
    EnvGuard env;
    oracle::TempDir dir("imp");
    REQUIRE(run_cli({"simulate", "--out", dir.path.string(), "--seed", "3", "--k", "40"}).status == 0);
    auto r = run_cli({"impute", "--config", (dir.path / "config.json").string()});
    REQUIRE_MESSAGE(r.status == 0, r.err);
    auto ds = load_dataset(dir.path / "results" / "completed_facilities.csv", dir.path / "results" / "completed_zctas.csv");
    CHECK(join_zcta(ds).missing_cells() == 0);
    auto raw = load_dataset(dir.path / "facilities.csv", dir.path / "zctas.csv");
    REQUIRE(ds.facilities.size() == raw.facilities.size());
    for (std::size_t i = 0; i < ds.facilities.size(); ++i) {
        CHECK(ds.facilities[i].shr == raw.facilities[i].shr);
        for (std::size_t j = 0; j < raw.facilities[i].covariates.size(); ++j)
            if (raw.facilities[i].covariates[j]) CHECK(ds.facilities[i].covariates[j] == raw.facilities[i].covariates[j]);
    }
    CHECK(fs::exists(dir.path / "results" / "manifest_impute.json"));
}

TEST_CASE("config problems are reported together") {
    oracle::TempDir dir("cfg");
    nlohmann::json j;
    j["facilities"] = "f.csv";
    j["zctas"] = "f.csv";
    j["output_dir"] = "out";
    j["colour"] = "blue";
    j["mcmc"] = {{"n_keep", 0}, {"rho_step", -1.0}};
    j["bench"] = {{"splits", {"80-20"}}};
    write_json(dir.path / "c.json", j);
    try {
        cli::load_run_config(dir.path / "c.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        for (const char* part : {"colour: unknown key", "referenced twice", "mcmc: counts", "mcmc.rho_step", "bench.splits"})
            CHECK_MESSAGE(msg.find(part) != std::string::npos, part);
    }

    nlohmann::json ok{{"facilities", "data/f.csv"}, {"zctas", "data/z.csv"}, {"output_dir", "out"}, {"seed", 4}};
    write_json(dir.path / "ok.json", ok);
    auto cfg = cli::load_run_config(dir.path / "ok.json");
    CHECK(cfg.facilities == dir.path / "data/f.csv");
    CHECK(cfg.bench.n_reps == 1000);
    CHECK(cfg.mcmc.n_burnin == 20000);
    CHECK(cfg.mcmc.n_keep == 50000);
    CHECK(cfg.seed == 4u);
}

TEST_CASE("cli errors are json records") {
    EnvGuard env;
    auto r = run_cli({"frobnicate"});
    CHECK(r.status == 2);
    auto rec = nlohmann::json::parse(r.err);
    CHECK(rec["status"] == "error");
    CHECK(rec["kind"] == "usage");

    oracle::TempDir dir("err");
    nlohmann::json j{{"facilities", "missing.csv"}, {"zctas", "z.csv"}, {"output_dir", "out"}};
    write_json(dir.path / "c.json", j);
    auto s = run_cli({"graph", "--config", (dir.path / "c.json").string()});
    CHECK(s.status == 1);
    auto rec2 = nlohmann::json::parse(s.err);
    CHECK(rec2["command"] == "graph");
    CHECK(rec2["kind"] == "config");
    CHECK(rec2["message"].get<std::string>().find("seed") != std::string::npos);
}

TEST_CASE("seed precedence and end-to-end determinism") {
    EnvGuard env;
    oracle::TempDir dir("e2e");
    REQUIRE(run_cli({"simulate", "--out", dir.path.string(), "--seed", "11", "--k", "30"}).status == 0);
    const std::string cfg = (dir.path / "config.json").string();
    const fs::path res = dir.path / "results";
    auto fit = [&](std::vector<std::string> extra) {
        std::vector<std::string> args{"fit", "--config", cfg, "--burnin", "200", "--keep", "300"};
        args.insert(args.end(), extra.begin(), extra.end());
        auto r = run_cli(args);
        REQUIRE_MESSAGE(r.status == 0, r.err);
        return slurp(res / "summary.csv");
    };
    REQUIRE(run_cli({"impute", "--config", cfg}).status == 0);
    const std::string base = fit({"--from-imputed"});
    CHECK(fit({"--from-imputed"}) == base);
    auto manifest = nlohmann::json::parse(slurp(res / "manifest_fit.json"));
    CHECK(manifest["seed"] == 11);
    CHECK(manifest["burnin_iterations"] == 200);
    CHECK(manifest["retained_draws"] == 300);

    ::setenv("ARTIFACT_SEED", "99", 1);
    const std::string env_run = fit({"--from-imputed"});
    CHECK(env_run != base);
    CHECK(nlohmann::json::parse(slurp(res / "manifest_fit.json"))["seed"] == 99);
    CHECK(fit({"--from-imputed", "--seed", "11"}) == base);
    ::unsetenv("ARTIFACT_SEED");

    double r = std::stod(slurp(res / "rse.txt"));
    CHECK(r >= 0.0);
    CHECK(fs::exists(res / "fitted.csv"));
    REQUIRE(run_cli({"export-maps", "--config", cfg, "--from-imputed"}).status == 0);
    CHECK(fs::exists(res / "zcta_aggregates.csv"));
    REQUIRE(run_cli({"graph", "--config", cfg}).status == 0);
    CHECK(fs::exists(res / "graph_eigenvalues.csv"));
    REQUIRE(run_cli({"bench", "--config", cfg, "--reps", "3"}).status == 0);
    auto bm = nlohmann::json::parse(slurp(res / "manifest_bench.json"));
    CHECK(bm["n_reps"] == 3);
}
