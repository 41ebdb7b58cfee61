#pragma once

#include "eqgraph/types.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace eqtest {

using eqgraph::Vector;

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

struct Random {
  explicit Random(std::uint64_t seed) : engine(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(engine); }
  Vector vector(Eigen::Index d, double sd = 1.0) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(sd);
    return v;
  }
  eqgraph::Point3 point(double sd = 1.0) { return {normal(sd), normal(sd), normal(sd)}; }
  eqgraph::Matrix3 rotation() {
    Eigen::Quaterniond q(normal(), normal(), normal(), normal());
    q.normalize();
    return q.toRotationMatrix();
  }
  std::mt19937_64 engine;
};

/// Ensemble whose i-th descriptor has vectors[i] at keypoints[i].
inline eqgraph::Ensemble make_ensemble(std::uint64_t id, const std::vector<Vector>& vectors,
                                       const std::vector<eqgraph::Point3>& keypoints,
                                       const std::string& expression = "neutral",
                                       std::uint64_t first_descriptor = 0, std::uint64_t collection = 0) {
  eqgraph::Ensemble e;
  e.id = eqgraph::EnsembleId{id};
  e.subject = "s" + std::to_string(collection);
  e.scan = e.subject + "_" + std::to_string(id);
  e.expression.label = expression;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    eqgraph::Descriptor d;
    d.vector = vectors[i];
    d.keypoint = keypoints[i];
    d.id = eqgraph::DescriptorId{first_descriptor + i};
    d.ensemble = e.id;
    d.collection = eqgraph::CollectionId{collection};
    e.descriptors.push_back(std::move(d));
  }
  return e;
}

/// Points spread over a few tens of mm with no three collinear (almost surely).
inline std::vector<eqgraph::Point3> scattered_points(Random& rng, std::size_t n, double sd = 20.0) {
  std::vector<eqgraph::Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.point(sd));
  return out;
}

}  // namespace eqtest
