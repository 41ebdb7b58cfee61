#include "eqgraph/kd_tree.hpp"

#include "eqgraph/core_model.hpp"
#include "eqgraph/error.hpp"

#include <algorithm>
#include <numeric>

namespace eqgraph {

namespace {

bool closer(const Neighbor& l, const Neighbor& r) {
  return l.squared_distance < r.squared_distance ||
         (l.squared_distance == r.squared_distance && l.index < r.index);
}

}  // namespace

KdTree::KdTree(std::vector<double> points, std::size_t dimension, std::size_t leaf_size)
    : points_(std::move(points)), dimension_(dimension), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (dimension_ == 0 || points_.size() % dimension_ != 0)
    throw InvalidArgument("KdTree: point buffer is not a multiple of the dimension");
  order_.resize(size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, 0, 0.0});
  if (end - begin <= leaf_size_) return id;

  std::uint32_t axis = 0;
  double widest = -1.0;
  for (std::uint32_t a = 0; a < dimension_; ++a) {
    double lo = points_[order_[begin] * dimension_ + a], hi = lo;
    for (auto i = begin + 1; i < end; ++i) {
      const double v = points_[order_[i] * dimension_ + a];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      axis = a;
    }
  }
  if (widest <= 0.0) return id;  // all points identical: keep as a leaf

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) {
                     return points_[l * dimension_ + axis] < points_[r * dimension_ + axis];
                   });
  const double split = points_[order_[mid] * dimension_ + axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  auto& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(std::int32_t node_id, std::span<const double> query, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const Neighbor cand{idx, squared_distance(query, point(idx))};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = query[node.axis] - node.split;
  const auto near = diff < 0 ? node.left : node.right;
  const auto far = diff < 0 ? node.right : node.left;
  search(near, query, k, heap);
  // Equal bounds are still explored: a tie may carry a smaller index.
  if (heap.size() < k || diff * diff <= heap.front().squared_distance) search(far, query, k, heap);
}

std::vector<Neighbor> KdTree::knn(std::span<const double> query, std::size_t k) const {
  if (query.size() != dimension_)
    throw DimensionMismatch("KdTree::knn: query dimension " + std::to_string(query.size()) +
                            " vs " + std::to_string(dimension_));
  std::vector<Neighbor> heap;
  k = std::min(k, size());
  if (k == 0) return heap;
  heap.reserve(k);
  search(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

}  // namespace eqgraph
