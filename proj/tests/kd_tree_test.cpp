#include "eqgraph/kd_tree.hpp"
#include "eqgraph/synth.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace eqgraph;

namespace {

std::vector<double> flatten(const std::vector<Vector>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) out.insert(out.end(), p.data(), p.data() + p.size());
  return out;
}

std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST_CASE("single point") {
  const KdTree t({1.0, 2.0}, 2);
  const auto hits = t.knn(std::vector<double>{1.0, 2.0}, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].index == 0);
  CHECK(hits[0].squared_distance == 0.0);
  CHECK(t.knn(std::vector<double>{0.0, 0.0}, 5).size() == 1);
}

TEST_CASE("agrees with brute force") {
  eqtest::Random rng(51);
  for (std::size_t n : {1000u, 10000u}) {
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.vector(20));
    const KdTree tree(flatten(pts), 20);
    for (int q = 0; q < 50; ++q) {
      const Vector query = rng.vector(20);
      const auto want = brute_knn(query, pts, 5);
      const auto got = tree.knn(span_of(query), 5);
      REQUIRE(got.size() == 5);
      for (std::size_t i = 0; i < 5; ++i) CHECK(got[i].index == want[i]);
    }
  }
}

TEST_CASE("ties come back in insertion order") {
  eqtest::Random rng(52);
  std::vector<Vector> pts;
  for (int i = 0; i < 300; ++i) {
    Vector v(3);
    for (int j = 0; j < 3; ++j) v[j] = static_cast<double>(static_cast<int>(rng.uniform(0, 4)));
    pts.push_back(v);
  }
  const KdTree tree(flatten(pts), 3, 4);
  for (int q = 0; q < 100; ++q) {
    Vector query(3);
    for (int j = 0; j < 3; ++j) query[j] = static_cast<double>(static_cast<int>(rng.uniform(0, 4)));
    for (std::size_t k : {1u, 7u, 40u}) {
      const auto want = brute_knn(query, pts, k);
      const auto got = tree.knn(span_of(query), k);
      REQUIRE(got.size() == k);
      for (std::size_t i = 0; i < k; ++i) CHECK(got[i].index == want[i]);
    }
  }
}

TEST_CASE("duplicates precede farther points") {
  const std::vector<Vector> pts{eqtest::vec({5, 5}), eqtest::vec({0, 0}), eqtest::vec({1, 1}),
                                eqtest::vec({0, 0})};
  const KdTree tree(flatten(pts), 2, 1);
  const auto got = tree.knn(std::vector<double>{0.1, 0.0}, 3);
  CHECK(got[0].index == 1);
  CHECK(got[1].index == 3);
  CHECK(got[2].index == 2);
}

TEST_CASE("brute_knn contract") {
  const std::vector<Vector> pts{eqtest::vec({0}), eqtest::vec({2}), eqtest::vec({1})};
  CHECK(brute_knn(eqtest::vec({2}), pts, 1) == std::vector<std::size_t>{1});
  CHECK(brute_knn(eqtest::vec({0}), pts, 3) == std::vector<std::size_t>{0, 2, 1});
  CHECK_THROWS(brute_knn(eqtest::vec({0}), pts, 4));
}
