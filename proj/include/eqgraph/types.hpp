#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace eqgraph {

using Vector = Eigen::VectorXd;
using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

/// Integer identifier tagged with the entity it names, so a descriptor id
/// cannot be passed where an ensemble id is expected.
template <typename Tag>
struct StrongId {
  std::uint64_t value = 0;

  constexpr StrongId() = default;
  constexpr explicit StrongId(std::uint64_t v) : value(v) {}

  friend constexpr auto operator<=>(StrongId, StrongId) = default;
};

using DescriptorId = StrongId<struct DescriptorTag>;
using EnsembleId = StrongId<struct EnsembleTag>;
using CollectionId = StrongId<struct CollectionTag>;
using SetId = StrongId<struct SetTag>;

inline constexpr const char* kNeutral = "neutral";

struct Descriptor {
  Vector vector;
  Point3 keypoint = Point3::Zero();  // mm
  DescriptorId id;
  EnsembleId ensemble;
  CollectionId collection;
};

/// Expression of a scan. Anything other than "neutral" is a non-neutral label.
struct Expression {
  std::string label = kNeutral;

  bool neutral() const { return label == kNeutral; }
  friend bool operator==(const Expression&, const Expression&) = default;
};

/// All descriptors extracted from one scan.
struct Ensemble {
  EnsembleId id;
  std::string subject;
  std::string scan;
  Expression expression;
  std::vector<Descriptor> descriptors;

  std::size_t size() const { return descriptors.size(); }
};

/// All ensembles of one subject.
struct Collection {
  CollectionId id;
  std::string subject;
  std::vector<Ensemble> ensembles;

  bool has_neutral() const {
    for (const auto& e : ensembles)
      if (e.expression.neutral()) return true;
    return false;
  }
  std::size_t descriptor_count() const {
    std::size_t n = 0;
    for (const auto& e : ensembles) n += e.size();
    return n;
  }
};

/// Throws DataError when the Ensemble / Collection invariants are violated
/// (mixed ids, empty ensembles, non-finite numerics, dimension drift).
void validate(const Ensemble& ensemble, int dimension);
void validate(const Collection& collection, int dimension);

}  // namespace eqgraph

template <typename Tag>
struct std::hash<eqgraph::StrongId<Tag>> {
  std::size_t operator()(eqgraph::StrongId<Tag> id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
