#include "eqgraph/spectral.hpp"

#include "eqgraph/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace eqgraph {

namespace {

constexpr double kMinDistance = 1e-9;
constexpr double kResidualTolerance = 1e-8;
constexpr int kMaxInverseIterations = 5000;

// Sign convention: the largest-magnitude element is positive.
void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

FiedlerResult fiedler_dense(const WeightedGraph& graph) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian(graph));
  if (solver.info() != Eigen::Success) throw Error("fiedler: eigendecomposition failed");
  FiedlerResult out{solver.eigenvalues()[1], solver.eigenvectors().col(1)};
  fix_sign(out.vector);
  return out;
}

FiedlerResult fiedler_inverse_iteration(const WeightedGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (const auto& e : graph.edges) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    triplets.emplace_back(u, v, -e.weight);
    triplets.emplace_back(v, u, -e.weight);
    degree[u] += e.weight;
    degree[v] += e.weight;
  }
  const double shift = 1e-6 * std::max(degree.mean(), 1e-12);
  for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(i, i, degree[i] + shift);
  Eigen::SparseMatrix<double> shifted(n, n);
  shifted.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
  if (solver.info() != Eigen::Success) throw Error("fiedler: factorization failed");

  // Deterministic start vector orthogonal to the constant vector.
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x[i] = static_cast<double>(i) - 0.5 * static_cast<double>(n - 1) + 0.25 * std::sin(1.0 + i);
  auto deflate = [&](Eigen::VectorXd& v) {
    v.array() -= v.mean();
    v.normalize();
  };
  deflate(x);

  const Eigen::MatrixXd dense_l = laplacian(graph);
  double lambda = 0.0;
  for (int iter = 0; iter < kMaxInverseIterations; ++iter) {
    Eigen::VectorXd next = solver.solve(x);
    deflate(next);
    x = next;
    const Eigen::VectorXd lx = dense_l * x;
    lambda = x.dot(lx);
    if ((lx - lambda * x).norm() <= kResidualTolerance * std::max(1.0, degree.maxCoeff())) break;
  }
  fix_sign(x);
  return {lambda, x};
}

}  // namespace

double inverse_distance_weight(double distance) {
  return 1.0 / std::max(distance, kMinDistance);
}

void normalize_weights(WeightedGraph& graph) {
  if (graph.edges.empty()) return;
  double sum = 0.0;
  for (const auto& e : graph.edges) sum += e.weight;
  const double mean = sum / static_cast<double>(graph.edges.size());
  for (auto& e : graph.edges) e.weight /= mean;
}

void validate(const WeightedGraph& graph) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : graph.edges) {
    if (e.u >= graph.size() || e.v >= graph.size())
      throw InvalidArgument("graph edge endpoint out of range");
    if (e.u == e.v) throw InvalidArgument("graph has a self-loop");
    if (!(e.weight > 0) || !std::isfinite(e.weight))
      throw InvalidArgument("graph edge weight must be positive and finite");
    if (!seen.insert(std::minmax(e.u, e.v)).second)
      throw InvalidArgument("graph has a duplicate edge");
  }
}

Eigen::MatrixXd laplacian(const WeightedGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges) {
    const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
    l(u, v) -= e.weight;
    l(v, u) -= e.weight;
    l(u, u) += e.weight;
    l(v, v) += e.weight;
  }
  return l;
}

std::vector<std::vector<std::size_t>> connected_components(const WeightedGraph& graph) {
  std::vector<std::size_t> parent(graph.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& e : graph.edges) {
    const auto a = find(e.u), b = find(e.v);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::vector<std::size_t>> groups(graph.size());
  for (std::size_t v = 0; v < graph.size(); ++v) groups[find(v)].push_back(v);
  std::vector<std::vector<std::size_t>> out;
  for (auto& g : groups)
    if (!g.empty()) out.push_back(std::move(g));
  return out;
}

WeightedGraph induced_subgraph(const WeightedGraph& graph, const std::vector<std::size_t>& keep) {
  std::vector<std::size_t> position(graph.size(), graph.size());
  WeightedGraph out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    position[keep[i]] = i;
    out.vertices.push_back(graph.vertices[keep[i]]);
  }
  for (const auto& e : graph.edges)
    if (position[e.u] < graph.size() && position[e.v] < graph.size())
      out.edges.push_back({position[e.u], position[e.v], e.weight});
  return out;
}

FiedlerResult fiedler(const WeightedGraph& graph, std::size_t dense_limit) {
  if (graph.size() < 2) throw InvalidArgument("fiedler: graph needs at least 2 vertices");
  return graph.size() <= dense_limit ? fiedler_dense(graph) : fiedler_inverse_iteration(graph);
}

std::vector<bool> two_means(const Eigen::VectorXd& values, int max_iters) {
  std::vector<bool> high(static_cast<std::size_t>(values.size()), false);
  if (values.size() == 0) return high;
  double lo = values.minCoeff(), hi = values.maxCoeff();
  if (lo == hi) return high;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double sum_lo = 0, sum_hi = 0;
    int n_lo = 0, n_hi = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const bool to_high = std::abs(values[i] - hi) < std::abs(values[i] - lo);
      if (to_high != high[static_cast<std::size_t>(i)]) changed = true;
      high[static_cast<std::size_t>(i)] = to_high;
      (to_high ? sum_hi : sum_lo) += values[i];
      ++(to_high ? n_hi : n_lo);
    }
    if (n_lo > 0) lo = sum_lo / n_lo;
    if (n_hi > 0) hi = sum_hi / n_hi;
    if (!changed && iter > 0) break;
  }
  return high;
}

Bipartition fiedler_bipartition(const WeightedGraph& graph) {
  if (graph.size() < 3) throw InvalidArgument("fiedler_bipartition: need at least 3 vertices");
  if (connected_components(graph).size() != 1)
    throw InvalidArgument("fiedler_bipartition: graph is disconnected; split by components first");

  const FiedlerResult f = fiedler(graph);
  auto high = two_means(f.vector);
  if (std::none_of(high.begin(), high.end(), [](bool b) { return b; })) {
    // Degenerate (all elements equal): split at the median position.
    for (std::size_t i = graph.size() / 2; i < graph.size(); ++i) high[i] = true;
  }
  Bipartition out;
  out.lambda = f.lambda;
  for (std::size_t i = 0; i < graph.size(); ++i) (high[i] ? out.b : out.a).push_back(i);
  return out;
}

}  // namespace eqgraph
