#pragma once

// One-to-one correspondence of two ensembles from descriptor dissimilarity
// and rigid consistency of the key-point geometry.

#include "eqgraph/types.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace eqgraph {

struct RigidTransform {
  Matrix3 rotation = Matrix3::Identity();
  Point3 translation = Point3::Zero();  // mm

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
};

struct CorrespondenceParams {
  double e_th = 4.0;              // mm, inlier threshold on transform error
  int max_iters = 30;
  double convergence_eps = 1e-4;  // on ||dR||_F + ||dt||
  double vicinity_radius = 8.0;   // mm
  /// Lowest-dissimilarity pairs whose triples seed the consensus search.
  int seed_pool = 12;
};

/// Throws InvalidArgument unless every parameter is positive.
void validate(const CorrespondenceParams& params);

/// Indices into the two ensembles' descriptor lists.
struct CorrespondencePair {
  std::size_t a = 0;
  std::size_t b = 0;
  double dissim = 0.0;
  bool inlier = false;
};

struct CorrespondenceSet {
  std::vector<CorrespondencePair> pairs;
  RigidTransform transform;
  int iterations = 0;
};

/// Sum of absolute element differences (L1).
double descriptor_dissimilarity(const Vector& a, const Vector& b);
inline double descriptor_dissimilarity(const Descriptor& a, const Descriptor& b) {
  return descriptor_dissimilarity(a.vector, b.vector);
}

/// Each descriptor of `first` paired with its minimum-dissimilarity partner
/// in `second` (lowest index on ties). Targets may repeat.
std::vector<CorrespondencePair> initial_correspondence(const Ensemble& first,
                                                       const Ensemble& second);

/// Least-squares rotation and translation taking each `.first` point onto its
/// `.second` point (SVD Procrustes with reflection correction).
RigidTransform rigid_fit(const std::vector<std::pair<Point3, Point3>>& pairs);

/// Transform error ||R k_a + t - k_b|| of one pair.
double transform_error(const RigidTransform& transform, const Point3& from, const Point3& to);

struct InlierSplit {
  std::vector<CorrespondencePair> inliers;
  std::vector<CorrespondencePair> outliers;
};

/// A pair is an inlier iff its transform error is <= e_th.
InlierSplit split_inliers(const std::vector<CorrespondencePair>& pairs, const Ensemble& first,
                          const Ensemble& second, const RigidTransform& transform, double e_th);

/// Full pipeline: initial matching, consensus-seeded iterative rigid fitting,
/// and re-correspondence within the vicinity of the transformed key-points.
/// Throws CorrespondenceFailure when fewer than three consistent pairs exist.
CorrespondenceSet correspond_ensembles(const Ensemble& first, const Ensemble& second,
                                       const CorrespondenceParams& params = {});

}  // namespace eqgraph
