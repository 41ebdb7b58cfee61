#pragma once

// Synthetic descriptor worlds with a known decomposition
//   descriptor = identity(subject, key-point) + offset(expression, key-point) + noise
// and brute-force oracles used to check the production paths.

#include "eqgraph/correspondence.hpp"
#include "eqgraph/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eqgraph {

struct SyntheticConfig {
  int identities = 20;
  int expressions = 4;  // including neutral
  int keypoints = 10;
  int dimension = 20;
  int scans_per_expression = 1;
  /// Floor on the distance between identity vectors of one key-point.
  double identity_separation = 1.0;
  /// Per-component sd of identity vectors; <= 0 derives 1.5 * separation / sqrt(2 * rank).
  double identity_spread = 0.0;
  /// Expression offsets have norms uniform in [1, 1.5] * expression_scale.
  double expression_scale = 2.0;
  /// Per-subject deviation added to the shared offsets (sd per component).
  double expression_perturbation = 0.0;
  /// Spread of the per-key-point base vectors that keep key-points apart.
  double keypoint_spread = 30.0;
  /// Rank of the subspace holding identity and expression variation (0 = full).
  int subspace_rank = 0;
  /// One identity latent per subject and one expression latent per expression,
  /// shared by every key-point (per-key-point draws otherwise).
  bool coherent_keypoints = false;
  double noise_sigma = 0.0;
  double dropout = 0.0;
  double grid_spacing = 20.0;     // mm
  double keypoint_jitter = 0.0;   // mm, per scan
  double max_rotation_deg = 30.0;
  double max_translation = 50.0;  // mm
  /// Identities used for training by split_world; the rest form probes/gallery.
  int training_identities = 10;
};

void validate(const SyntheticConfig& config);

struct ScanTruth {
  std::string subject;
  std::string scan;
  std::string expression;
  RigidTransform transform;
  std::vector<int> keypoint_labels;  // per descriptor, in ensemble order
};

struct SyntheticTruth {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> subjects;
  std::vector<std::string> expressions;           // expressions[0] == "neutral"
  std::vector<std::vector<Vector>> identity;      // [subject][keypoint]
  std::vector<std::vector<Vector>> offsets;       // [expression][keypoint]
  std::vector<std::vector<std::vector<Vector>>> subject_offsets;  // [subject][expression][keypoint]
  std::vector<Point3> layout;                     // canonical key-point positions, mm
  std::vector<ScanTruth> scans;
  std::map<DescriptorId, int> keypoint_of;        // every generated descriptor
  std::map<DescriptorId, int> subject_of;

  int subject_index(const std::string& subject) const;
  int expression_index(const std::string& label) const;
};

struct World {
  std::vector<Collection> collections;  // one per identity
  SyntheticTruth truth;
};

/// Deterministic in (config, seed). Throws InvalidArgument for bad configs.
World generate_world(const SyntheticConfig& config, std::uint64_t seed);

struct WorldSplit {
  std::vector<Collection> training;
  std::vector<Ensemble> gallery;  // first neutral scan of each held-out identity
  std::vector<Ensemble> probes;   // every non-neutral scan of held-out identities
};

/// First `training_identities` collections train; the rest are held out.
WorldSplit split_world(const World& world, int training_identities);

/// Exact kNN by exhaustive scan; ties by index. Throws when k > |points|.
std::vector<std::size_t> brute_knn(const Vector& query, const std::vector<Vector>& points,
                                   std::size_t k);

/// Fraction of members agreeing with their set's majority key-point label.
double partition_quality(const std::vector<EquivalenceSet>& sets, const SyntheticTruth& truth);

/// Exact minimum over the bridging-constrained path family: the direct path,
/// entrance and exit within one equivalence set, or in two ir-linked sets of
/// different collections. Throws InvalidArgument above 64 sets.
double exact_path_oracle(const Vector& x, const Vector& y, const Model& model);

}  // namespace eqgraph
