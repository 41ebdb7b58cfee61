#pragma once

// On-line matching of a probe ensemble against a gallery ensemble through the
// trained graph. Every corresponded descriptor pair (x, y) is routed
//   x -> entrance ~ B1 -> B2 ~ exit -> y
// where entrance/B1 live in the collection assigned to the probe and exit/B2
// in the collection assigned to the gallery. Equivalence hops (~) are free;
// the cost is the norm of the summed identity displacements.

#include "eqgraph/kd_tree.hpp"
#include "eqgraph/model.hpp"

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace eqgraph {

struct IndexHit {
  DescriptorId id;
  double distance = 0.0;
};

struct DescriptorLabel {
  EnsembleId ensemble;
  CollectionId collection;
  std::optional<SetId> set;
};

/// Exact kNN over all training descriptors plus one index per collection
/// restricted to equivalence-set members. Ties resolve by descriptor id.
class DescriptorIndex {
 public:
  explicit DescriptorIndex(const Model& model);

  std::vector<IndexHit> nearest(const Vector& query, std::size_t k) const;
  /// Nearest equivalence-set members of one collection.
  std::vector<IndexHit> nearest_in(CollectionId collection, const Vector& query,
                                   std::size_t k) const;

  const DescriptorLabel& label(DescriptorId id) const { return labels_.at(id); }
  std::size_t size() const { return global_ids_.size(); }

 private:
  struct Part {
    KdTree tree;
    std::vector<DescriptorId> ids;
  };
  static Part make_part(const std::vector<const Descriptor*>& members, int dimension);
  static std::vector<IndexHit> query(const Part& part, const Vector& q, std::size_t k);

  Part global_;
  std::vector<DescriptorId> global_ids_;
  std::unordered_map<CollectionId, Part> per_collection_;
  std::unordered_map<DescriptorId, DescriptorLabel> labels_;
};

struct MatchParams {
  int vote_k = 9;
  int gate_candidates = 3;
  int refine_iters = 6;
  int top_n = 40;
  /// Collections tried per side while collection re-assignment is allowed.
  int collection_candidates = 3;
  /// Score by direct distances only (baseline without the graph).
  bool plain = false;
};

void validate(const MatchParams& params);

struct CollectionVote {
  CollectionId collection;
  int votes = 0;
  double total_distance = 0.0;
};

/// Each query's vote_k nearest training descriptors vote for their
/// collection. Ranked by votes, then smaller total neighbour distance, then
/// collection id.
std::vector<CollectionVote> rank_collections(const std::vector<Vector>& queries,
                                             const DescriptorIndex& index, int vote_k);
CollectionId assign_collection(const Ensemble& ensemble, const DescriptorIndex& index, int vote_k);

struct GateAssignment {
  CollectionId probe_collection;
  CollectionId gallery_collection;
  DescriptorId entrance;
  DescriptorId exit;
  double m_prime = std::numeric_limits<double>::infinity();
};

/// True when a path can run from `entrance` to `exit`: both are set members
/// and either share a set or sit in ir-linked sets of different collections.
bool gates_valid(DescriptorId entrance, DescriptorId exit, const Model& model);

/// ||(entrance - x) + (B2 - B1) + (y - exit)||. Throws InvalidArgument when
/// the gates are not valid.
double pair_path_measure(const Vector& x, const Vector& y, DescriptorId entrance,
                         DescriptorId exit, const Model& model);

/// Argmin of pair_path_measure over the gate_candidates nearest entrances of
/// x (probe collection) times nearest exits of y (gallery collection). Ties go
/// to the lowest (entrance, exit) ids. nullopt when no combination is valid.
std::optional<GateAssignment> assign_gates(const Vector& x, const Vector& y,
                                           CollectionId probe_collection,
                                           CollectionId gallery_collection,
                                           const DescriptorIndex& index, const Model& model,
                                           int gate_candidates);

struct RefineResult {
  std::vector<std::optional<GateAssignment>> gates;
  /// m' per pair: the initial value then one entry per round.
  std::vector<std::vector<double>> traces;
};

/// Alternating refinement; changes are committed only when they lower m'.
/// Collection re-assignment is allowed in the first half of the rounds.
RefineResult refine_assignments(const std::vector<Vector>& xs, const std::vector<Vector>& ys,
                                std::vector<std::optional<GateAssignment>> gates,
                                CollectionId probe_collection, CollectionId gallery_collection,
                                const DescriptorIndex& index, const Model& model,
                                const MatchParams& params);

/// min(m', ||x - y||); gate failures fall back to the direct distance.
double pair_measure(const Vector& x, const Vector& y, const std::optional<GateAssignment>& gates);

struct PairDetail {
  std::size_t probe_index = 0;
  std::size_t gallery_index = 0;
  double direct = 0.0;
  double m = 0.0;
  std::optional<GateAssignment> gates;
  std::vector<double> trace;
};

struct MatchResult {
  double s = 0.0;
  std::vector<double> per_pair;  // m of each corresponded pair
  std::vector<PairDetail> details;
  CollectionId probe_collection;
  CollectionId gallery_collection;
};

/// Sum of the top_n smallest values (all when fewer).
double ensemble_measure(std::vector<double> m_values, int top_n);

/// Throws CorrespondenceFailure when the two ensembles cannot be corresponded.
MatchResult match_ensembles(const Ensemble& probe, const Ensemble& gallery, const Model& model,
                            const DescriptorIndex& index, const MatchParams& params);

struct DissimilarityMatrix {
  std::vector<std::string> probe_ids;
  std::vector<std::string> gallery_ids;
  Eigen::MatrixXd raw;         // s values, failures hold the row maximum
  Eigen::MatrixXd normalized;  // per-row min-max to [0, 1]
  std::vector<std::pair<std::size_t, std::size_t>> failures;
};

/// Per-row min-max normalization; constant rows become zeros.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& raw);

DissimilarityMatrix dissimilarity_matrix(const std::vector<Ensemble>& probes,
                                         const std::vector<Ensemble>& galleries,
                                         const Model& model, const DescriptorIndex& index,
                                         const MatchParams& params);

}  // namespace eqgraph
