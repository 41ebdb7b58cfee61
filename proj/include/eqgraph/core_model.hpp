#pragma once

// Displacement algebra of the descriptor space: equivalence mappings between
// members of an equivalence set, the minimum-norm invariant displacement, and
// identity / expression change operators.

#include "eqgraph/types.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>

namespace eqgraph {

/// Corresponded descriptors of one collection (one key-point seen under
/// several expressions) plus the neutral member acting as the star hub.
struct EquivalenceSet {
  SetId id;
  CollectionId collection;
  std::vector<DescriptorId> members;
  DescriptorId bridging;
};

enum class DisplacementKind { identity_change, expression_change };

struct Displacement {
  Vector delta;
  DisplacementKind kind = DisplacementKind::identity_change;
  std::string from_label;
  std::string to_label;
};

/// Sequential Euclidean norm / distance. The summation order is fixed so that
/// the same inputs always give bit-identical results.
double euclidean_norm(const Vector& v);
double euclidean_distance(const Vector& a, const Vector& b);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Maps x from the tangential frame at `from` to the frame at `to`:
/// x + to - from.
Vector equivalence_map(const Vector& x, const Descriptor& from, const Descriptor& to);

struct InvariantDisplacement {
  Vector delta;
  /// Member indices (t1, t2, t3) into the equivalence set's vector list.
  std::array<std::size_t, 3> triple{};
};

/// Minimum-norm displacement between the images of x and y over every triple
/// of equivalent descriptors. `members` are the member vectors of one set.
/// Ties resolve to the lexicographically smallest triple.
InvariantDisplacement invariant_displacement(const Vector& x, const Vector& y,
                                             std::span<const Vector> members);

Vector change_identity(const Vector& x, const Displacement& delta);
Vector change_expression(const Vector& x, const Displacement& delta);

/// Sum of deltas of the same kind; the result carries the outer labels.
Displacement compose(const Displacement& first, const Displacement& second);

}  // namespace eqgraph
