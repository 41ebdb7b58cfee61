#include "eqgraph/error.hpp"
#include "eqgraph/spectral.hpp"

#include "doctest.h"
#include "support.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <numeric>

using namespace eqgraph;

namespace {

WeightedGraph graph(std::size_t n, std::vector<WeightedEdge> edges) {
  WeightedGraph g;
  for (std::size_t i = 0; i < n; ++i) g.vertices.push_back(DescriptorId{i});
  g.edges = std::move(edges);
  return g;
}

WeightedGraph complete(std::size_t n) {
  std::vector<WeightedEdge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.push_back({i, j, 1.0});
  return graph(n, e);
}

// Two 4-cliques {0..3} and {4..7} joined by 3-4 at weight 0.01, relabelled by perm.
WeightedGraph barbell(const std::vector<std::size_t>& perm) {
  std::vector<WeightedEdge> e;
  for (std::size_t base : {0u, 4u})
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) e.push_back({perm[base + i], perm[base + j], 1.0});
  e.push_back({perm[3], perm[4], 0.01});
  return graph(8, e);
}

double cut_weight(const WeightedGraph& g, const std::vector<bool>& side) {
  double w = 0;
  for (const auto& e : g.edges)
    if (side[e.u] != side[e.v]) w += e.weight;
  return w;
}

}  // namespace

TEST_CASE("edge weights") {
  CHECK(inverse_distance_weight(2.0) == 0.5);
  CHECK(inverse_distance_weight(0.0) == doctest::Approx(1e9));
  auto g = graph(3, {{0, 1, 2.0}, {1, 2, 4.0}});
  normalize_weights(g);
  CHECK((g.edges[0].weight + g.edges[1].weight) / 2.0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.edges[1].weight / g.edges[0].weight == doctest::Approx(2.0));
}

TEST_CASE("graph validation") {
  CHECK_THROWS_AS(validate(graph(2, {{0, 0, 1.0}})), InvalidArgument);
  CHECK_THROWS_AS(validate(graph(2, {{0, 1, 1.0}, {1, 0, 1.0}})), InvalidArgument);
  CHECK_THROWS_AS(validate(graph(2, {{0, 2, 1.0}})), InvalidArgument);
  CHECK_THROWS_AS(validate(graph(2, {{0, 1, 0.0}})), InvalidArgument);
  CHECK_NOTHROW(validate(graph(2, {{0, 1, 1.0}})));
}

TEST_CASE("laplacian facts") {
  eqtest::Random rng(31);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 3 + static_cast<std::size_t>(t % 9);
    std::vector<WeightedEdge> e;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.5) e.push_back({i, j, rng.uniform(0.01, 3.0)});
    const auto g = graph(n, e);
    const Eigen::MatrixXd l = laplacian(g);
    CHECK((l - l.transpose()).norm() == 0.0);
    for (Eigen::Index r = 0; r < l.rows(); ++r) CHECK(std::abs(l.row(r).sum()) <= 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    const bool connected = connected_components(g).size() == 1;
    CHECK((es.eigenvalues()[1] > 1e-9) == connected);
  }
}

TEST_CASE("fiedler of known graphs") {
  SUBCASE("path P3") {
    const auto g = graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto f = fiedler(g);
    CHECK(f.lambda == doctest::Approx(1.0).epsilon(1e-12));
    // Hand eigenvector of P3 for eigenvalue 1: (1, 0, -1) / sqrt 2.
    CHECK(std::abs(f.vector[1]) <= 1e-9);
    CHECK(std::abs(std::abs(f.vector[0]) - std::sqrt(0.5)) <= 1e-9);
    const auto b = fiedler_bipartition(g);
    CHECK(std::min(b.a.size(), b.b.size()) == 1);
    const auto& lone = b.a.size() == 1 ? b.a : b.b;
    CHECK((lone[0] == 0 || lone[0] == 2));
  }
  SUBCASE("complete graphs") {
    for (std::size_t n = 3; n <= 10; ++n) CHECK(std::abs(fiedler(complete(n)).lambda - double(n)) <= 1e-9);
  }
  SUBCASE("sign convention") {
    const auto f = fiedler(graph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 2.0}}));
    Eigen::Index at = 0;
    f.vector.cwiseAbs().maxCoeff(&at);
    CHECK(f.vector[at] > 0);
  }
}

TEST_CASE("iterative solver agrees with the dense one") {
  eqtest::Random rng(32);
  for (int t = 0; t < 5; ++t) {
    const std::size_t n = 40;
    std::vector<WeightedEdge> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1, rng.uniform(0.5, 2.0)});
    for (int k = 0; k < 60; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform(0, n)) % n, j = static_cast<std::size_t>(rng.uniform(0, n)) % n;
      if (i + 1 >= j) continue;
      bool dup = false;
      for (const auto& x : e) dup = dup || (x.u == i && x.v == j);
      if (!dup) e.push_back({i, j, rng.uniform(0.1, 1.0)});
    }
    const auto g = graph(n, e);
    const auto dense = fiedler(g, 512);
    const auto sparse = fiedler(g, 0);
    CHECK(sparse.lambda == doctest::Approx(dense.lambda).epsilon(1e-7));
    CHECK(std::abs(std::abs(sparse.vector.dot(dense.vector)) - 1.0) <= 1e-6);
  }
}

TEST_CASE("weak bridge between two cliques") {
  eqtest::Random rng(33);
  std::vector<std::size_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < 100; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng.engine);
    const auto g = barbell(perm);
    const auto b = fiedler_bipartition(g);
    std::vector<bool> side(8, false);
    for (auto v : b.b) side[v] = true;

    // Exhaustive minimum balanced-free cut over all non-trivial bipartitions.
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> best_side;
    for (unsigned mask = 1; mask < 255; ++mask) {
      std::vector<bool> s(8);
      for (unsigned i = 0; i < 8; ++i) s[i] = (mask >> i) & 1u;
      const double w = cut_weight(g, s);
      if (w < best) {
        best = w;
        best_side = s;
      }
    }
    CHECK(cut_weight(g, side) == doctest::Approx(best));
    CHECK(b.a.size() == 4);
    CHECK(b.b.size() == 4);
    const bool first = side[perm[0]];
    for (int i = 0; i < 4; ++i) CHECK(side[perm[static_cast<std::size_t>(i)]] == first);
    for (int i = 4; i < 8; ++i) CHECK(side[perm[static_cast<std::size_t>(i)]] != first);
  }
}

TEST_CASE("two_means") {
  Eigen::VectorXd v(6);
  v << -1.0, -0.9, -1.1, 2.0, 2.1, 1.9;
  const auto hi = two_means(v);
  CHECK(hi == std::vector<bool>{false, false, false, true, true, true});
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(4, 0.5);
  const auto all = two_means(flat);
  CHECK(std::count(all.begin(), all.end(), true) == 0);
}

TEST_CASE("components and bipartition preconditions") {
  const auto g = graph(5, {{0, 1, 1.0}, {3, 4, 1.0}});
  const auto comps = connected_components(g);
  REQUIRE(comps.size() == 3);
  CHECK(comps[0] == std::vector<std::size_t>{0, 1});
  CHECK(comps[1] == std::vector<std::size_t>{2});
  CHECK(comps[2] == std::vector<std::size_t>{3, 4});
  CHECK_THROWS_AS(fiedler_bipartition(g), InvalidArgument);
  CHECK_THROWS_AS(fiedler_bipartition(graph(2, {{0, 1, 1.0}})), InvalidArgument);

  const auto sub = induced_subgraph(g, {3, 4});
  REQUIRE(sub.size() == 2);
  CHECK(sub.vertices[0] == DescriptorId{3});
  REQUIRE(sub.edges.size() == 1);
  CHECK(sub.edges[0].u == 0);
  CHECK(sub.edges[0].v == 1);
}
