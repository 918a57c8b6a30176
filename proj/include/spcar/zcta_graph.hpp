#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spcar/data_model.hpp"
#include "spcar/geo_order.hpp"

namespace spcar {

struct Edge {
    std::string a;
    std::string b;
    bool operator==(const Edge&) const = default;
};

/// adjacency.csv: header zcta_a,zcta_b; one undirected edge per row.
std::vector<Edge> load_adjacency(const std::filesystem::path& path);
void write_adjacency(const std::filesystem::path& path, std::span<const Edge> edges);

/// Edges between every pair of ZCTAs whose centroids lie within `threshold_km`.
std::vector<Edge> threshold_edges(std::span<const ZctaRecord> zctas, double threshold_km);

/// Undirected 0/1 graph before island repair. Neighbor lists are sorted.
struct RawGraph {
    std::vector<std::string> ids;
    std::vector<LatLon> centroids;
    std::vector<std::vector<std::size_t>> neighbors;

    std::size_t size() const { return ids.size(); }
    std::size_t index_of(std::string_view id) const;  // throws ValidationError
};

/// Builds the graph over `node_ids` (in that order). Edge endpoints must be
/// known ZCTAs; edges touching a ZCTA outside `node_ids` are dropped.
/// Duplicates collapse; self-loops throw ValidationError.
RawGraph build_graph(std::span<const Edge> edges, std::span<const ZctaRecord> zctas,
                     std::span<const std::string> node_ids);

/// Same, over every ZCTA in the table.
RawGraph build_graph(std::span<const Edge> edges, std::span<const ZctaRecord> zctas);

/// Symmetric augmented adjacency with precomputed degrees and Laplacian
/// spectrum. Immutable once built.
class ZctaGraph {
public:
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<std::vector<std::size_t>>& neighbors() const { return neighbors_; }
    const std::vector<std::size_t>& degrees() const { return degrees_; }
    /// Eigenvalues of D - W*, ascending.
    const std::vector<double>& laplacian_eigenvalues() const { return eigenvalues_; }
    const std::vector<Edge>& augmented_edges() const { return augmented_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t edge_count() const;

    double neighbor_sum(std::size_t k, const Eigen::VectorXd& phi) const;

    /// phi' Q(rho) phi with Q(rho) = rho (D - W*) + (1 - rho) I.
    double quad_form(const Eigen::VectorXd& phi, double rho) const;

    /// Dense W* (for diagnostics and small problems).
    Eigen::MatrixXd dense_adjacency() const;

    /// Builds from symmetric neighbor lists; computes degrees and spectrum.
    static ZctaGraph from_neighbors(std::vector<std::string> ids, std::vector<std::vector<std::size_t>> neighbors,
                                    std::vector<Edge> augmented = {});

private:
    std::vector<std::string> ids_;
    std::vector<std::vector<std::size_t>> neighbors_;
    std::vector<std::size_t> degrees_;
    std::vector<double> eigenvalues_;
    std::vector<Edge> augmented_;
};

/// Connects each originally isolated node to its nearest centroid (ties go
/// to the lexicographically smaller id) with a symmetric edge. Mutually
/// nearest isolated nodes end up sharing a single edge.
ZctaGraph augment_islands(const RawGraph& graph, std::span<const LatLon> centroids);
ZctaGraph augment_islands(const RawGraph& graph);

/// log det(Q(rho) / tau2) = sum_m log((1 - rho) + rho * lambda_m) - K log tau2.
double logdet_precision(double rho, double tau2, const ZctaGraph& graph);

}  // namespace spcar
