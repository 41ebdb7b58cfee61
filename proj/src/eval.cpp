#include "eqgraph/eval.hpp"

#include "eqgraph/error.hpp"

#include <algorithm>

namespace eqgraph {

void validate(const LabeledMatrix& lm) {
  if (static_cast<std::size_t>(lm.scores.rows()) != lm.probe_subjects.size() ||
      static_cast<std::size_t>(lm.scores.cols()) != lm.gallery_subjects.size())
    throw InvalidArgument("labeled matrix: label counts do not match the matrix shape");
  for (const auto& p : lm.probe_subjects)
    if (std::find(lm.gallery_subjects.begin(), lm.gallery_subjects.end(), p) ==
        lm.gallery_subjects.end())
      throw InvalidArgument("labeled matrix: probe subject '" + p + "' is not in the gallery");
}

std::vector<double> cmc_curve(const LabeledMatrix& lm, std::size_t max_rank) {
  validate(lm);
  const auto cols = static_cast<std::size_t>(lm.scores.cols());
  if (max_rank > cols) throw InvalidArgument("cmc_curve: max_rank exceeds gallery size");

  std::vector<std::size_t> hits(cols + 1, 0);
  for (Eigen::Index r = 0; r < lm.scores.rows(); ++r) {
    const auto& subject = lm.probe_subjects[static_cast<std::size_t>(r)];
    std::size_t best_rank = cols;
    for (std::size_t g = 0; g < cols; ++g) {
      if (lm.gallery_subjects[g] != subject) continue;
      const double v = lm.scores(r, static_cast<Eigen::Index>(g));
      std::size_t rank = 1;
      for (std::size_t o = 0; o < cols; ++o) {
        const double w = lm.scores(r, static_cast<Eigen::Index>(o));
        if (w < v || (w == v && o < g)) ++rank;
      }
      best_rank = std::min(best_rank, rank);
    }
    ++hits[best_rank];
  }

  std::vector<double> rates;
  std::size_t cumulative = 0;
  const double n = static_cast<double>(lm.scores.rows());
  for (std::size_t r = 1; r <= max_rank; ++r) {
    cumulative += hits[r];
    rates.push_back(n > 0 ? static_cast<double>(cumulative) / n : 0.0);
  }
  return rates;
}

std::vector<RocPoint> roc_curve(const std::vector<double>& genuine,
                                const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty())
    throw InvalidArgument("roc_curve: need at least one genuine and one impostor score");
  std::vector<double> g = genuine, i = impostor;
  std::sort(g.begin(), g.end());
  std::sort(i.begin(), i.end());
  std::vector<double> thresholds = g;
  thresholds.insert(thresholds.end(), i.begin(), i.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<RocPoint> curve;
  curve.push_back({thresholds.front() - 1.0, 0.0, 0.0});
  const double ng = static_cast<double>(g.size()), ni = static_cast<double>(i.size());
  for (const double t : thresholds) {
    const auto acc_g = std::upper_bound(g.begin(), g.end(), t) - g.begin();
    const auto acc_i = std::upper_bound(i.begin(), i.end(), t) - i.begin();
    curve.push_back({t, static_cast<double>(acc_i) / ni, static_cast<double>(acc_g) / ng});
  }
  return curve;
}

std::vector<RocPoint> roc_curve(const LabeledMatrix& lm) {
  validate(lm);
  std::vector<double> genuine, impostor;
  for (Eigen::Index r = 0; r < lm.scores.rows(); ++r)
    for (Eigen::Index c = 0; c < lm.scores.cols(); ++c)
      (lm.probe_subjects[static_cast<std::size_t>(r)] == lm.gallery_subjects[static_cast<std::size_t>(c)]
           ? genuine
           : impostor)
          .push_back(lm.scores(r, c));
  return roc_curve(genuine, impostor);
}

double vr_at_far(const std::vector<RocPoint>& curve, double far_target) {
  if (curve.empty()) throw InvalidArgument("vr_at_far: empty curve");
  double vr = 0.0;
  for (const auto& p : curve)
    if (p.far <= far_target) vr = std::max(vr, p.vr);
  return vr;
}

}  // namespace eqgraph
