#pragma once

// Closed-set identification (CMC) and verification (ROC) summaries of a
// probe x gallery dissimilarity matrix. Lower scores mean more similar.

#include <Eigen/Core>

#include <string>
#include <vector>

namespace eqgraph {

struct LabeledMatrix {
  Eigen::MatrixXd scores;  // probes x gallery
  std::vector<std::string> probe_subjects;
  std::vector<std::string> gallery_subjects;
};

/// Throws InvalidArgument on shape mismatches or a probe subject missing from
/// the gallery.
void validate(const LabeledMatrix& lm);

/// rates[r - 1] = fraction of probes whose true gallery entry ranks within the
/// r smallest row values (ties by gallery index), for r = 1..max_rank.
std::vector<double> cmc_curve(const LabeledMatrix& lm, std::size_t max_rank);

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double vr = 0.0;
};

/// Sweep over every distinct score (accept iff score <= threshold), preceded
/// by the point that accepts nothing.
std::vector<RocPoint> roc_curve(const LabeledMatrix& lm);

/// Genuine / impostor variant used by roc_curve.
std::vector<RocPoint> roc_curve(const std::vector<double>& genuine,
                                const std::vector<double>& impostor);

/// VR at the last sweep point whose FAR does not exceed far_target.
double vr_at_far(const std::vector<RocPoint>& curve, double far_target = 0.001);

}  // namespace eqgraph
