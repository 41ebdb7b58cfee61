#pragma once

#include "eqgraph/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace eqgraph {

struct Neighbor {
  std::size_t index = 0;  // insertion position of the point
  double squared_distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-nearest-neighbour search under Euclidean distance. Results are
/// ordered by (distance, insertion position), so equal distances come back
/// in insertion order.
class KdTree {
 public:
  KdTree() = default;
  /// `points` is row-major, `dimension` values per point.
  KdTree(std::vector<double> points, std::size_t dimension, std::size_t leaf_size = 8);

  std::size_t size() const { return dimension_ == 0 ? 0 : points_.size() / dimension_; }
  std::size_t dimension() const { return dimension_; }
  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * dimension_, dimension_};
  }

  /// Returns min(k, size()) neighbours.
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in order_
    std::int32_t left = -1, right = -1;
    std::uint32_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, std::span<const double> query, std::size_t k,
              std::vector<Neighbor>& heap) const;

  std::vector<double> points_;
  std::size_t dimension_ = 0;
  std::size_t leaf_size_ = 8;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace eqgraph
