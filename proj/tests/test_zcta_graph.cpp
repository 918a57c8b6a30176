#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spcar/error.hpp"
#include "spcar/zcta_graph.hpp"

using namespace spcar;

namespace {

std::vector<ZctaRecord> zctas_at(const std::vector<std::pair<std::string, LatLon>>& pts) {
    std::vector<ZctaRecord> out;
    for (const auto& [id, p] : pts) out.push_back({id, p.lat, p.lon, 1000, 1.0});
    return out;
}

ZctaGraph random_graph(std::mt19937_64& rng, std::size_t K, double p_edge) {
    std::bernoulli_distribution edge(p_edge);
    std::vector<std::vector<std::size_t>> nb(K);
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < K; ++k) ids.push_back("z" + std::to_string(k));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j)
            if (edge(rng)) {
                nb[i].push_back(j);
                nb[j].push_back(i);
            }
    return ZctaGraph::from_neighbors(ids, nb);
}

}  // namespace

TEST_CASE("duplicate and reversed edges collapse") {
    auto z = zctas_at({{"A", {27, -81}}, {"B", {27.1, -81}}});
    std::vector<Edge> e{{"A", "B"}, {"B", "A"}, {"A", "B"}};
    auto raw = build_graph(e, z);
    auto g = augment_islands(raw);
    CHECK(g.edge_count() == 1);
    CHECK(g.degrees() == std::vector<std::size_t>{1, 1});
    CHECK(g.augmented_edges().empty());
}

TEST_CASE("bad edges are rejected") {
    auto z = zctas_at({{"A", {27, -81}}, {"B", {27.1, -81}}});
    std::vector<Edge> self{{"A", "A"}};
    CHECK_THROWS_AS(build_graph(self, z), ValidationError);
    std::vector<Edge> unknown{{"A", "Q"}};
    CHECK_THROWS_AS(build_graph(unknown, z), ValidationError);
}

TEST_CASE("graph keeps only the requested nodes") {
    auto z = zctas_at({{"A", {27, -81}}, {"B", {27.1, -81}}, {"C", {27.2, -81}}});
    std::vector<Edge> e{{"A", "B"}, {"B", "C"}};
    std::vector<std::string> nodes{"C", "B"};
    auto raw = build_graph(e, z, nodes);
    CHECK(raw.ids == nodes);
    CHECK(raw.neighbors[0] == std::vector<std::size_t>{1});
    CHECK(raw.neighbors[1] == std::vector<std::size_t>{0});
}

TEST_CASE("325 nodes load into a 325-node graph") {
    std::vector<std::pair<std::string, LatLon>> pts;
    for (int k = 0; k < 325; ++k) pts.push_back({std::to_string(30000 + k), {25.0 + 0.02 * k, -81.0}});
    auto z = zctas_at(pts);
    auto g = augment_islands(build_graph(threshold_edges(z, 3.0), z));
    CHECK(g.size() == 325);
    CHECK(g.laplacian_eigenvalues().size() == 325);
}

TEST_CASE("island repair examples") {
    auto z = zctas_at({{"A", {27.0, -81}}, {"B", {27.5, -81}}, {"C", {27.6, -81}}});
    std::vector<Edge> ab{{"A", "B"}};
    auto g = augment_islands(build_graph(ab, z));
    CHECK(g.degrees() == std::vector<std::size_t>{1, 2, 1});
    REQUIRE(g.augmented_edges().size() == 1);
    CHECK(g.augmented_edges()[0] == Edge{"C", "B"});

    std::vector<Edge> full{{"A", "B"}, {"B", "C"}};
    CHECK(augment_islands(build_graph(full, z)).augmented_edges().empty());
}

TEST_CASE("mutually nearest islands share one edge in either processing order") {
    auto z = zctas_at({{"A", {27.0, -81}}, {"B", {27.01, -81}}, {"C", {29.0, -81}}, {"D", {29.5, -81}}});
    std::vector<Edge> cd{{"C", "D"}};
    for (auto order : {std::vector<std::string>{"A", "B", "C", "D"}, std::vector<std::string>{"B", "A", "D", "C"}}) {
        auto g = augment_islands(build_graph(cd, z, order));
        CHECK(g.edge_count() == 2);
        REQUIRE(g.augmented_edges().size() == 1);
        const auto& e = g.augmented_edges()[0];
        CHECK(((e.a == "A" && e.b == "B") || (e.a == "B" && e.b == "A")));
        for (auto d : g.degrees()) CHECK(d == 1);
    }
}

TEST_CASE("equidistant nearest neighbours tie-break on id") {
    // offsets of exactly 0.5 degrees of longitude give an exact distance tie
    auto z = zctas_at({{"M", {27.0, -81.0}}, {"Z", {27.0, -80.5}}, {"B", {27.0, -81.5}}});
    REQUIRE(haversine_km({27.0, -81.0}, {27.0, -80.5}) == haversine_km({27.0, -81.0}, {27.0, -81.5}));
    std::vector<Edge> zb{{"Z", "B"}};
    auto g = augment_islands(build_graph(zb, z));
    REQUIRE(g.augmented_edges().size() == 1);
    CHECK(g.augmented_edges()[0] == Edge{"M", "B"});
}

TEST_CASE("augmentation adds one edge per island except mutual pairs") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> lat(25.0, 31.0), lon(-87.0, -80.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<std::string, LatLon>> pts;
        for (int k = 0; k < 30; ++k) pts.push_back({"z" + std::to_string(k), {lat(rng), lon(rng)}});
        auto z = zctas_at(pts);
        auto raw = build_graph(threshold_edges(z, 60.0), z);
        std::size_t islands = 0;
        for (const auto& nb : raw.neighbors) islands += nb.empty();
        auto g = augment_islands(raw);
        for (auto d : g.degrees()) CHECK(d >= 1);
        // each island picks its nearest; count mutual island pairs
        std::vector<std::size_t> pick(raw.size(), raw.size());
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (!raw.neighbors[k].empty()) continue;
            double best = 1e300;
            for (std::size_t j = 0; j < raw.size(); ++j) {
                if (j == k) continue;
                double d = haversine_km(raw.centroids[k], raw.centroids[j]);
                if (d < best || (d == best && raw.ids[j] < raw.ids[pick[k]])) {
                    best = d;
                    pick[k] = j;
                }
            }
        }
        std::size_t mutual = 0;
        for (std::size_t k = 0; k < raw.size(); ++k)
            if (pick[k] < raw.size() && pick[pick[k]] == k && k < pick[k]) ++mutual;
        CHECK(g.augmented_edges().size() == islands - mutual);
    }
}

TEST_CASE("single-node graph cannot be augmented") {
    auto z = zctas_at({{"A", {27, -81}}});
    std::vector<Edge> none;
    CHECK_THROWS_AS(augment_islands(build_graph(none, z)), ContractError);
}

TEST_CASE("log-determinant examples") {
    auto path = ZctaGraph::from_neighbors({"a", "b", "c"}, {{1}, {0, 2}, {1}});
    CHECK(logdet_precision(0.0, 2.0, path) == doctest::Approx(-3.0 * std::log(2.0)).epsilon(1e-14));
    auto Q = oracle::leroux_q(path.dense_adjacency(), 0.5);
    CHECK(logdet_precision(0.5, 1.0, path) == doctest::Approx(oracle::dense_logdet(Q)).epsilon(1e-12));
    CHECK_THROWS_WITH(logdet_precision(1.0, 1.0, path), "intrinsic boundary: Q singular");
    CHECK(logdet_precision(0.999999, 1.0, path) < logdet_precision(0.99, 1.0, path));
}

TEST_CASE("log-determinant matches dense determinant on random graphs") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> size(2, 50);
    std::uniform_real_distribution<double> rho(0.0, 0.99), p(0.02, 0.4), tau(0.1, 5.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        auto g = random_graph(rng, size(rng), p(rng));
        double r = rho(rng), t = tau(rng);
        double dense = oracle::dense_logdet(oracle::leroux_q(g.dense_adjacency(), r)) -
                       static_cast<double>(g.size()) * std::log(t);
        double fast = logdet_precision(r, t, g);
        worst = std::max(worst, std::abs(fast - dense) / std::max(1.0, std::abs(dense)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("quadratic form and positive definiteness") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> rho(0.0, 0.999);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = random_graph(rng, 25, 0.15);
        Eigen::VectorXd phi(25);
        for (auto& v : phi) v = z(rng);
        double r = rho(rng);
        auto Q = oracle::leroux_q(g.dense_adjacency(), r);
        CHECK(g.quad_form(phi, r) == doctest::Approx(phi.dot(Q * phi)).epsilon(1e-10));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
        CHECK(es.eigenvalues().minCoeff() == doctest::Approx(1.0 - r).epsilon(1e-9));
        CHECK(g.laplacian_eigenvalues().front() == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("adjacency file round trip") {
    oracle::TempDir dir("adj");
    std::vector<Edge> e{{"32001", "32002"}, {"32002", "32010"}};
    write_adjacency(dir.path / "a.csv", e);
    CHECK(load_adjacency(dir.path / "a.csv") == e);
}
