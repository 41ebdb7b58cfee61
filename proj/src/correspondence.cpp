#include "eqgraph/correspondence.hpp"

#include "eqgraph/error.hpp"

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace eqgraph {

namespace {

constexpr std::size_t kMinPairs = 3;

// Spread ratio below which the source points are treated as collinear.
constexpr double kCollinearRatio = 1e-12;

bool collinear(const Point3& a, const Point3& b, const Point3& c) {
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
  return (b - a).cross(c - a).squaredNorm() <= 1e-12 * scale * scale;
}

std::vector<std::pair<Point3, Point3>> keypoint_pairs(const std::vector<CorrespondencePair>& pairs,
                                                      const Ensemble& first,
                                                      const Ensemble& second) {
  std::vector<std::pair<Point3, Point3>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.emplace_back(first.descriptors[p.a].keypoint, second.descriptors[p.b].keypoint);
  return out;
}

double transform_change(const RigidTransform& a, const RigidTransform& b) {
  return (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm();
}

// Best rigid hypothesis from triples of the most similar pairs; scored by
// inlier count over every initial pair. Ties keep the earliest triple.
std::optional<RigidTransform> consensus_seed(const std::vector<CorrespondencePair>& pairs,
                                             const Ensemble& first, const Ensemble& second,
                                             const CorrespondenceParams& params) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return pairs[l].dissim < pairs[r].dissim;
  });
  const std::size_t pool = std::min<std::size_t>(order.size(), params.seed_pool);

  auto src = [&](std::size_t i) -> const Point3& { return first.descriptors[pairs[i].a].keypoint; };
  auto dst = [&](std::size_t i) -> const Point3& { return second.descriptors[pairs[i].b].keypoint; };
  auto distances_agree = [&](std::size_t i, std::size_t j) {
    return std::abs((src(i) - src(j)).norm() - (dst(i) - dst(j)).norm()) <= 2.0 * params.e_th;
  };

  std::optional<RigidTransform> best;
  std::size_t best_count = kMinPairs - 1;
  auto consider = [&](const RigidTransform& t) {
    std::size_t count = 0;
    for (const auto& p : pairs)
      if (transform_error(t, first.descriptors[p.a].keypoint, second.descriptors[p.b].keypoint) <=
          params.e_th)
        ++count;
    if (count > best_count) {
      best_count = count;
      best = t;
    }
  };

  for (std::size_t i = 0; i < pool; ++i) {
    for (std::size_t j = i + 1; j < pool; ++j) {
      if (!distances_agree(order[i], order[j])) continue;
      for (std::size_t k = j + 1; k < pool; ++k) {
        const std::size_t a = order[i], b = order[j], c = order[k];
        if (!distances_agree(a, c) || !distances_agree(b, c)) continue;
        if (collinear(src(a), src(b), src(c)) || collinear(dst(a), dst(b), dst(c))) continue;
        consider(rigid_fit({{src(a), dst(a)}, {src(b), dst(b)}, {src(c), dst(c)}}));
      }
    }
  }
  try {
    consider(rigid_fit(keypoint_pairs(pairs, first, second)));
  } catch (const DegenerateGeometry&) {
  }
  return best;
}

}  // namespace

void validate(const CorrespondenceParams& params) {
  if (!(params.e_th > 0) || params.max_iters <= 0 || !(params.convergence_eps > 0) ||
      !(params.vicinity_radius > 0) || params.seed_pool < 3)
    throw InvalidArgument("correspondence parameters must be positive (seed_pool >= 3)");
}

double descriptor_dissimilarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("descriptor_dissimilarity: dimension " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
  double sum = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) sum += std::abs(a[k] - b[k]);
  return sum;
}

std::vector<CorrespondencePair> initial_correspondence(const Ensemble& first,
                                                       const Ensemble& second) {
  if (first.descriptors.empty() || second.descriptors.empty())
    throw InvalidArgument("initial_correspondence: empty ensemble");
  std::vector<CorrespondencePair> out;
  out.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CorrespondencePair best{i, 0, std::numeric_limits<double>::infinity(), false};
    for (std::size_t j = 0; j < second.size(); ++j) {
      const double d =
          descriptor_dissimilarity(first.descriptors[i].vector, second.descriptors[j].vector);
      if (d < best.dissim) {
        best.b = j;
        best.dissim = d;
      }
    }
    out.push_back(best);
  }
  return out;
}

RigidTransform rigid_fit(const std::vector<std::pair<Point3, Point3>>& pairs) {
  if (pairs.size() < kMinPairs)
    throw DegenerateGeometry("rigid_fit: need at least 3 point pairs, got " +
                             std::to_string(pairs.size()));
  const double n = static_cast<double>(pairs.size());
  Point3 src_mean = Point3::Zero(), dst_mean = Point3::Zero();
  for (const auto& [s, d] : pairs) {
    src_mean += s;
    dst_mean += d;
  }
  src_mean /= n;
  dst_mean /= n;

  Matrix3 scatter = Matrix3::Zero();
  Matrix3 cross = Matrix3::Zero();
  for (const auto& [s, d] : pairs) {
    const Point3 cs = s - src_mean;
    scatter += cs * cs.transpose();
    cross += cs * (d - dst_mean).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix3> spread(scatter, Eigen::EigenvaluesOnly);
  const auto& ev = spread.eigenvalues();  // ascending
  if (!(ev[2] > 0) || ev[1] <= kCollinearRatio * ev[2])
    throw DegenerateGeometry("rigid_fit: source points are collinear or coincident");

  Eigen::JacobiSVD<Matrix3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix3 u = svd.matrixU();
  const Matrix3 v = svd.matrixV();
  Matrix3 fix = Matrix3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;

  RigidTransform out;
  out.rotation = v * fix * u.transpose();
  out.translation = dst_mean - out.rotation * src_mean;
  return out;
}

double transform_error(const RigidTransform& transform, const Point3& from, const Point3& to) {
  return (transform.apply(from) - to).norm();
}

InlierSplit split_inliers(const std::vector<CorrespondencePair>& pairs, const Ensemble& first,
                          const Ensemble& second, const RigidTransform& transform, double e_th) {
  if (!(e_th > 0)) throw InvalidArgument("split_inliers: e_th must be positive");
  InlierSplit out;
  for (auto p : pairs) {
    p.inlier = transform_error(transform, first.descriptors[p.a].keypoint,
                               second.descriptors[p.b].keypoint) <= e_th;
    (p.inlier ? out.inliers : out.outliers).push_back(p);
  }
  return out;
}

CorrespondenceSet correspond_ensembles(const Ensemble& first, const Ensemble& second,
                                       const CorrespondenceParams& params) {
  validate(params);
  if (first.size() < kMinPairs || second.size() < kMinPairs)
    throw CorrespondenceFailure("correspond_ensembles: ensembles need at least 3 descriptors");

  const auto initial = initial_correspondence(first, second);
  const auto seed = consensus_seed(initial, first, second, params);
  if (!seed) throw CorrespondenceFailure("correspond_ensembles: no consistent rigid hypothesis");

  CorrespondenceSet out;
  RigidTransform previous = *seed;
  auto inliers = split_inliers(initial, first, second, previous, params.e_th).inliers;
  if (inliers.size() < kMinPairs)
    throw CorrespondenceFailure("correspond_ensembles: fewer than 3 inliers");

  for (int iter = 1; iter <= params.max_iters; ++iter) {
    const RigidTransform current = rigid_fit(keypoint_pairs(inliers, first, second));
    inliers = split_inliers(initial, first, second, current, params.e_th).inliers;
    if (inliers.size() < kMinPairs)
      throw CorrespondenceFailure("correspond_ensembles: fewer than 3 inliers at iteration " +
                                  std::to_string(iter));
    out.transform = current;
    out.iterations = iter;
    if (iter >= 2 && transform_change(current, previous) < params.convergence_eps) break;
    previous = current;
  }

  // Re-correspond inside the vicinity of each transformed key-point.
  std::vector<CorrespondencePair> candidates;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const Point3 moved = out.transform.apply(first.descriptors[i].keypoint);
    std::optional<CorrespondencePair> best;
    for (std::size_t j = 0; j < second.size(); ++j) {
      if ((moved - second.descriptors[j].keypoint).norm() > params.vicinity_radius) continue;
      const double d =
          descriptor_dissimilarity(first.descriptors[i].vector, second.descriptors[j].vector);
      if (!best || d < best->dissim) best = CorrespondencePair{i, j, d, false};
    }
    if (best) candidates.push_back(*best);
  }

  // One-to-one: greedy by ascending dissimilarity.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const CorrespondencePair& l, const CorrespondencePair& r) {
                     return l.dissim < r.dissim;
                   });
  std::vector<bool> used_a(first.size(), false), used_b(second.size(), false);
  for (auto p : candidates) {
    if (used_a[p.a] || used_b[p.b]) continue;
    used_a[p.a] = used_b[p.b] = true;
    p.inlier = transform_error(out.transform, first.descriptors[p.a].keypoint,
                               second.descriptors[p.b].keypoint) <= params.e_th;
    out.pairs.push_back(p);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const CorrespondencePair& l, const CorrespondencePair& r) { return l.a < r.a; });
  return out;
}

}  // namespace eqgraph
