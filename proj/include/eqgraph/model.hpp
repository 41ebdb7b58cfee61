#pragma once

// The trained structure: training collections, their equivalence sets (each
// a star around its bridging descriptor), and identity-relation links between
// bridging descriptors of different collections.

#include "eqgraph/core_model.hpp"
#include "eqgraph/correspondence.hpp"
#include "eqgraph/pca.hpp"
#include "eqgraph/types.hpp"

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace eqgraph {

enum class LinkTopology { all_pairs, hub };

struct BuildParams {
  CorrespondenceParams correspondence;
  int diameter_threshold = 2;
  double lambda_min = 0.2;
  double oversize_factor = 1.5;
  double min_size_fraction = 0.5;
  LinkTopology topology = LinkTopology::all_pairs;
  std::string hub_subject;  // used with LinkTopology::hub

  friend bool operator==(const BuildParams&, const BuildParams&);
};

void validate(const BuildParams& params);

/// Bridging-to-bridging edge between sets of two different collections.
struct IrLink {
  SetId a;
  SetId b;
  friend bool operator==(const IrLink&, const IrLink&) = default;
};

struct StarGraph {
  SetId set;
  DescriptorId bridging;
  std::vector<DescriptorId> leaves;
};

class Model {
 public:
  Model() = default;

  /// Set ids must be 0..n-1 in order. Throws BuildError when an invariant is
  /// broken (unknown descriptors, bridging not neutral, links within one
  /// collection, ...).
  Model(int dimension, std::vector<Collection> collections, std::vector<EquivalenceSet> sets,
        std::vector<IrLink> ir_links, BuildParams params,
        std::optional<PcaBasis> projection = std::nullopt);

  int dimension() const { return dimension_; }
  const std::vector<Collection>& collections() const { return collections_; }
  const std::vector<EquivalenceSet>& sets() const { return sets_; }
  const std::vector<IrLink>& ir_links() const { return ir_links_; }
  const BuildParams& params() const { return params_; }
  const std::optional<PcaBasis>& projection() const { return projection_; }

  bool empty() const { return sets_.empty(); }
  std::size_t descriptor_count() const { return locations_.size(); }

  const Descriptor& descriptor(DescriptorId id) const;
  const Ensemble& ensemble_of(DescriptorId id) const;
  const Collection& collection(CollectionId id) const;
  const EquivalenceSet& set(SetId id) const { return sets_.at(id.value); }
  /// Null for descriptors pruned from every equivalence set.
  const EquivalenceSet* set_of(DescriptorId id) const;
  const Vector& bridging_vector(SetId id) const { return descriptor(set(id).bridging).vector; }

  bool linked(SetId a, SetId b) const;
  StarGraph star(SetId id) const;

  /// Every training descriptor in ascending id order.
  std::vector<const Descriptor*> descriptors_by_id() const;

 private:
  struct Location {
    std::size_t collection = 0;
    std::size_t ensemble = 0;
    std::size_t index = 0;
  };

  static std::uint64_t link_key(SetId a, SetId b);

  int dimension_ = 0;
  std::vector<Collection> collections_;
  std::vector<EquivalenceSet> sets_;
  std::vector<IrLink> ir_links_;
  BuildParams params_;
  std::optional<PcaBasis> projection_;

  std::unordered_map<DescriptorId, Location> locations_;
  std::unordered_map<CollectionId, std::size_t> collection_index_;
  std::unordered_map<DescriptorId, std::size_t> set_index_;
  std::unordered_set<std::uint64_t> links_;
};

}  // namespace eqgraph
