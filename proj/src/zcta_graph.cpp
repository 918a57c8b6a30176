#include "spcar/zcta_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "spcar/csv.hpp"
#include "spcar/error.hpp"

namespace spcar {

std::vector<Edge> load_adjacency(const std::filesystem::path& path) {
    auto table = csv::read_file(path, {"zcta_a", "zcta_b"});
    std::vector<Edge> edges;
    edges.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row[0].empty() || row[1].empty()) throw ParseError("empty zcta id", table.line_numbers[r]);
        edges.push_back({row[0], row[1]});
    }
    return edges;
}

void write_adjacency(const std::filesystem::path& path, std::span<const Edge> edges) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "zcta_a,zcta_b\n";
    for (const auto& e : edges) out << e.a << ',' << e.b << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Edge> threshold_edges(std::span<const ZctaRecord> zctas, double threshold_km) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < zctas.size(); ++i)
        for (std::size_t j = i + 1; j < zctas.size(); ++j) {
            double d = haversine_km({zctas[i].centroid_latitude, zctas[i].centroid_longitude},
                                    {zctas[j].centroid_latitude, zctas[j].centroid_longitude});
            if (d <= threshold_km) edges.push_back({zctas[i].zcta_id, zctas[j].zcta_id});
        }
    return edges;
}

std::size_t RawGraph::index_of(std::string_view id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw ValidationError(fmt::format("unknown zcta '{}'", id));
    return static_cast<std::size_t>(it - ids.begin());
}

RawGraph build_graph(std::span<const Edge> edges, std::span<const ZctaRecord> zctas,
                     std::span<const std::string> node_ids) {
    std::unordered_map<std::string_view, const ZctaRecord*> table;
    for (const auto& z : zctas) table.emplace(z.zcta_id, &z);

    RawGraph g;
    std::unordered_map<std::string_view, std::size_t> index;
    for (const auto& id : node_ids) {
        auto it = table.find(id);
        if (it == table.end()) throw ValidationError(fmt::format("graph node '{}' is not in the zcta table", id));
        if (!index.emplace(id, g.ids.size()).second) throw ValidationError(fmt::format("duplicate graph node '{}'", id));
        g.ids.push_back(id);
        g.centroids.push_back({it->second->centroid_latitude, it->second->centroid_longitude});
    }

    std::vector<std::set<std::size_t>> adj(g.ids.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& edge = edges[e];
        if (!table.contains(edge.a) || !table.contains(edge.b))
            throw ValidationError(fmt::format("edge {} ({}, {}) references an unknown zcta", e + 1, edge.a, edge.b));
        if (edge.a == edge.b) throw ValidationError(fmt::format("edge {} is a self-loop on {}", e + 1, edge.a));
        auto ia = index.find(edge.a);
        auto ib = index.find(edge.b);
        if (ia == index.end() || ib == index.end()) continue;
        adj[ia->second].insert(ib->second);
        adj[ib->second].insert(ia->second);
    }
    g.neighbors.reserve(adj.size());
    for (auto& s : adj) g.neighbors.emplace_back(s.begin(), s.end());
    return g;
}

RawGraph build_graph(std::span<const Edge> edges, std::span<const ZctaRecord> zctas) {
    std::vector<std::string> ids;
    ids.reserve(zctas.size());
    for (const auto& z : zctas) ids.push_back(z.zcta_id);
    return build_graph(edges, zctas, ids);
}

std::size_t ZctaGraph::edge_count() const {
    std::size_t total = 0;
    for (auto d : degrees_) total += d;
    return total / 2;
}

double ZctaGraph::neighbor_sum(std::size_t k, const Eigen::VectorXd& phi) const {
    double s = 0.0;
    for (std::size_t j : neighbors_[k]) s += phi[static_cast<Eigen::Index>(j)];
    return s;
}

double ZctaGraph::quad_form(const Eigen::VectorXd& phi, double rho) const {
    double laplacian = 0.0;
    for (std::size_t k = 0; k < neighbors_.size(); ++k)
        for (std::size_t j : neighbors_[k])
            if (j > k) {
                double diff = phi[static_cast<Eigen::Index>(k)] - phi[static_cast<Eigen::Index>(j)];
                laplacian += diff * diff;
            }
    return rho * laplacian + (1.0 - rho) * phi.squaredNorm();
}

Eigen::MatrixXd ZctaGraph::dense_adjacency() const {
    const auto K = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t k = 0; k < neighbors_.size(); ++k)
        for (std::size_t j : neighbors_[k]) W(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = 1.0;
    return W;
}

ZctaGraph ZctaGraph::from_neighbors(std::vector<std::string> ids, std::vector<std::vector<std::size_t>> neighbors,
                                    std::vector<Edge> augmented) {
    if (ids.size() != neighbors.size()) throw ContractError("graph: ids and neighbor lists differ in length");
    const std::size_t K = ids.size();
    for (std::size_t k = 0; k < K; ++k) {
        auto& list = neighbors[k];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        for (std::size_t j : list) {
            if (j >= K) throw ContractError("graph: neighbor index out of range");
            if (j == k) throw ContractError(fmt::format("graph: self-loop at {}", ids[k]));
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j : neighbors[k])
            if (!std::binary_search(neighbors[j].begin(), neighbors[j].end(), k))
                throw ContractError(fmt::format("graph: asymmetric edge {} -> {}", ids[k], ids[j]));

    ZctaGraph g;
    g.ids_ = std::move(ids);
    g.neighbors_ = std::move(neighbors);
    g.augmented_ = std::move(augmented);
    g.degrees_.resize(K);
    for (std::size_t k = 0; k < K; ++k) g.degrees_[k] = g.neighbors_[k].size();

    Eigen::MatrixXd L = -g.dense_adjacency();
    for (std::size_t k = 0; k < K; ++k)
        L(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = static_cast<double>(g.degrees_[k]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("Laplacian eigendecomposition failed");
    const Eigen::VectorXd& ev = solver.eigenvalues();
    g.eigenvalues_.assign(ev.data(), ev.data() + ev.size());
    std::sort(g.eigenvalues_.begin(), g.eigenvalues_.end());
    return g;
}

ZctaGraph augment_islands(const RawGraph& graph, std::span<const LatLon> centroids) {
    const std::size_t K = graph.size();
    if (K < 2) throw ContractError("cannot augment a single-node graph");
    if (centroids.size() != K) throw ContractError("augment_islands: one centroid per node required");

    auto neighbors = graph.neighbors;
    std::vector<std::size_t> isolated;
    for (std::size_t k = 0; k < K; ++k)
        if (graph.neighbors[k].empty()) isolated.push_back(k);

    std::vector<Edge> added;
    for (std::size_t k : isolated) {
        std::size_t best = K;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < K; ++j) {
            if (j == k) continue;
            double d = haversine_km(centroids[k], centroids[j]);
            if (d < best_d || (d == best_d && graph.ids[j] < graph.ids[best])) {
                best = j;
                best_d = d;
            }
        }
        auto& nk = neighbors[k];
        if (std::find(nk.begin(), nk.end(), best) != nk.end()) continue;  // mutual pair already joined
        nk.push_back(best);
        neighbors[best].push_back(k);
        added.push_back({graph.ids[k], graph.ids[best]});
    }
    return ZctaGraph::from_neighbors(graph.ids, std::move(neighbors), std::move(added));
}

ZctaGraph augment_islands(const RawGraph& graph) { return augment_islands(graph, graph.centroids); }

double logdet_precision(double rho, double tau2, const ZctaGraph& graph) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        if (rho == 1.0) throw ContractError("intrinsic boundary: Q singular");
        throw ContractError("rho must lie in [0, 1)");
    }
    if (!(tau2 > 0.0)) throw ContractError("tau2 must be positive");
    double s = 0.0;
    for (double lambda : graph.laplacian_eigenvalues()) s += std::log((1.0 - rho) + rho * std::max(lambda, 0.0));
    return s - static_cast<double>(graph.size()) * std::log(tau2);
}

}  // namespace spcar
