#pragma once

// Off-line training. Each collection is corresponded over a planned set of
// ensemble pairs, the union of correspondences is split into connected
// components, oversized components are bipartitioned spectrally, and the
// survivors become equivalence sets with a neutral bridging descriptor.
// Bridging descriptors of different collections are then corresponded to
// form identity-relation links.

#include "eqgraph/model.hpp"
#include "eqgraph/spectral.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace eqgraph {

using EnsemblePair = std::pair<std::size_t, std::size_t>;

/// Starts from the chain 0-1-...-(n-1) and keeps adding an edge between the
/// first diameter-realizing pair until the diameter is <= threshold.
std::vector<EnsemblePair> plan_ensemble_pairs(std::size_t ensemble_count, int diameter_threshold);
inline std::vector<EnsemblePair> plan_ensemble_pairs(const Collection& c, int diameter_threshold) {
  return plan_ensemble_pairs(c.ensembles.size(), diameter_threshold);
}

/// Hop diameter of the pair plan over `ensemble_count` nodes (BFS); -1 when
/// the plan is disconnected.
int plan_diameter(std::size_t ensemble_count, const std::vector<EnsemblePair>& plan);

struct CollectionGraph {
  /// Connected components with weights normalized to mean 1 per component.
  std::vector<WeightedGraph> components;
  std::vector<std::string> failures;  // planned pairs that failed to correspond
};

CollectionGraph build_collection_graph(const Collection& collection, const BuildParams& params);

/// Weighted graph over the given descriptors, one edge per pair, with
/// inverse-L1 weights normalized to mean 1.
WeightedGraph weighted_graph(const std::vector<const Descriptor*>& vertices,
                             const std::vector<std::pair<std::size_t, std::size_t>>& edges);

struct RefinedSets {
  std::vector<std::vector<DescriptorId>> groups;
  std::size_t discarded = 0;
};

/// Recursively bipartitions components larger than oversize_factor *
/// expected_size until they fit or their Fiedler value reaches lambda_min,
/// then drops groups smaller than min_size_fraction * expected_size.
RefinedSets refine_equivalence_sets(const std::vector<WeightedGraph>& components,
                                    std::size_t expected_size, const BuildParams& params);

/// The neutral member nearest to the member mean (lowest id on ties), or
/// nullopt when no member is neutral.
std::optional<DescriptorId> choose_bridging(
    const std::vector<const Descriptor*>& members,
    const std::function<bool(const Descriptor&)>& is_neutral);

/// Equivalence sets of one collection before global numbering.
struct CollectionSets {
  const Collection* collection = nullptr;
  std::vector<EquivalenceSet> sets;  // ids are local positions
};

struct LinkResult {
  std::vector<IrLink> links;  // in global set ids, offsets by collection order
  std::vector<std::string> failures;
};

/// Corresponds the bridging descriptors of every collection pair (or of each
/// collection with the hub) and links the matched sets. `set_offsets[i]` is
/// the global id of the first set of `per_collection[i]`.
LinkResult link_collections(const std::vector<CollectionSets>& per_collection,
                            const std::vector<std::size_t>& set_offsets,
                            const BuildParams& params);

struct BuildReport {
  std::vector<std::string> warnings;
  std::size_t discarded_sets = 0;
  std::size_t skipped_collections = 0;
};

struct BuildResult {
  Model model;
  BuildReport report;
};

/// Full training pipeline. Deterministic in (training, params). Throws
/// BuildError when no usable equivalence set results.
BuildResult build_model(const std::vector<Collection>& training, const BuildParams& params = {});

}  // namespace eqgraph
