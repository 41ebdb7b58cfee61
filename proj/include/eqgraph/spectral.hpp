#pragma once

// Weighted undirected graphs over descriptors and spectral bipartitioning
// with the Fiedler vector of the graph Laplacian.

#include "eqgraph/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace eqgraph {

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 1.0;
};

/// Edges index into `vertices`. No self-loops, no duplicate edges.
struct WeightedGraph {
  std::vector<DescriptorId> vertices;
  std::vector<WeightedEdge> edges;

  std::size_t size() const { return vertices.size(); }
};

/// Edge weight from a descriptor distance: 1 / max(distance, 1e-9).
double inverse_distance_weight(double distance);

/// Divides every weight by the mean weight so that the mean becomes 1.
void normalize_weights(WeightedGraph& graph);

/// Throws InvalidArgument on self-loops, duplicates, out-of-range endpoints
/// or non-positive weights.
void validate(const WeightedGraph& graph);

Eigen::MatrixXd laplacian(const WeightedGraph& graph);

/// Connected components as sorted lists of vertex positions, ordered by their
/// smallest vertex position.
std::vector<std::vector<std::size_t>> connected_components(const WeightedGraph& graph);

/// The subgraph induced by `keep` (vertex positions of `graph`), in that order.
WeightedGraph induced_subgraph(const WeightedGraph& graph, const std::vector<std::size_t>& keep);

struct FiedlerResult {
  double lambda = 0.0;
  Eigen::VectorXd vector;
};

/// Second-smallest Laplacian eigenpair. Dense symmetric eigendecomposition up
/// to `dense_limit` vertices, shifted inverse iteration above.
FiedlerResult fiedler(const WeightedGraph& graph, std::size_t dense_limit = 512);

/// 1-D two-means on scalar values, seeded at the minimum and maximum.
/// Returns true for members of the cluster seeded at the maximum.
std::vector<bool> two_means(const Eigen::VectorXd& values, int max_iters = 50);

struct Bipartition {
  std::vector<std::size_t> a;  // vertex positions
  std::vector<std::size_t> b;
  double lambda = 0.0;
};

/// Splits a connected graph with >= 3 vertices into two non-empty sides.
/// Throws InvalidArgument for disconnected or too small graphs.
Bipartition fiedler_bipartition(const WeightedGraph& graph);

}  // namespace eqgraph
