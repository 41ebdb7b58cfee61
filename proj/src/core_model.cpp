#include "eqgraph/core_model.hpp"

#include "eqgraph/error.hpp"

#include <cmath>
#include <limits>

namespace eqgraph {

namespace {

void require_same_dimension(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b)
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a) +
                            " vs " + std::to_string(b));
}

bool all_finite(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return false;
  return true;
}

}  // namespace

void validate(const Ensemble& ensemble, int dimension) {
  if (ensemble.descriptors.empty())
    throw DataError("ensemble '" + ensemble.scan + "' is empty");
  for (const auto& d : ensemble.descriptors) {
    if (d.ensemble != ensemble.id)
      throw DataError("descriptor " + std::to_string(d.id.value) +
                      " does not carry its ensemble id");
    if (d.vector.size() != dimension)
      throw DataError("descriptor " + std::to_string(d.id.value) + " has dimension " +
                      std::to_string(d.vector.size()) + ", expected " +
                      std::to_string(dimension));
    if (!all_finite(d.vector) || !d.keypoint.allFinite())
      throw DataError("descriptor " + std::to_string(d.id.value) + " has non-finite values");
  }
}

void validate(const Collection& collection, int dimension) {
  if (collection.ensembles.empty())
    throw DataError("collection '" + collection.subject + "' has no ensembles");
  for (const auto& e : collection.ensembles) {
    if (e.subject != collection.subject)
      throw DataError("ensemble '" + e.scan + "' belongs to subject '" + e.subject +
                      "', not '" + collection.subject + "'");
    validate(e, dimension);
    for (const auto& d : e.descriptors)
      if (d.collection != collection.id)
        throw DataError("descriptor " + std::to_string(d.id.value) +
                        " does not carry its collection id");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

double euclidean_norm(const Vector& v) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) sum += v[i] * v[i];
  return std::sqrt(sum);
}

double euclidean_distance(const Vector& a, const Vector& b) {
  require_same_dimension(a.size(), b.size(), "euclidean_distance");
  return std::sqrt(squared_distance({a.data(), static_cast<std::size_t>(a.size())},
                                    {b.data(), static_cast<std::size_t>(b.size())}));
}

Vector equivalence_map(const Vector& x, const Descriptor& from, const Descriptor& to) {
  require_same_dimension(x.size(), from.vector.size(), "equivalence_map");
  require_same_dimension(x.size(), to.vector.size(), "equivalence_map");
  return x + to.vector - from.vector;
}

InvariantDisplacement invariant_displacement(const Vector& x, const Vector& y,
                                             std::span<const Vector> members) {
  if (members.empty()) throw InvalidArgument("invariant_displacement: empty equivalence set");
  require_same_dimension(x.size(), y.size(), "invariant_displacement");
  for (const auto& m : members) require_same_dimension(x.size(), m.size(), "invariant_displacement");

  const std::size_t n = members.size();
  InvariantDisplacement best;
  double best_norm = std::numeric_limits<double>::infinity();
  Vector candidate(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t r = 0; r < n; ++r) {
        candidate = (x + members[r] - members[i]) - (y + members[r] - members[j]);
        const double norm = euclidean_norm(candidate);
        if (norm < best_norm) {
          best_norm = norm;
          best.delta = candidate;
          best.triple = {i, j, r};
        }
      }
    }
  }
  return best;
}

Vector change_identity(const Vector& x, const Displacement& delta) {
  if (delta.kind != DisplacementKind::identity_change)
    throw KindMismatch("change_identity: displacement is an expression change");
  require_same_dimension(x.size(), delta.delta.size(), "change_identity");
  return x + delta.delta;
}

Vector change_expression(const Vector& x, const Displacement& delta) {
  if (delta.kind != DisplacementKind::expression_change)
    throw KindMismatch("change_expression: displacement is an identity change");
  require_same_dimension(x.size(), delta.delta.size(), "change_expression");
  return x + delta.delta;
}

Displacement compose(const Displacement& first, const Displacement& second) {
  if (first.kind != second.kind) throw KindMismatch("compose: displacement kinds differ");
  require_same_dimension(first.delta.size(), second.delta.size(), "compose");
  return {first.delta + second.delta, first.kind, first.from_label, second.to_label};
}

}  // namespace eqgraph
