#include "eqgraph/synth.hpp"

#include "eqgraph/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

namespace eqgraph {

namespace {

// Portable streams: mt19937_64 is fully specified, the distributions below
// are written out so that a seed reproduces the same world everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector normal_vector(Eigen::Index n, double sd) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = sd * normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::string pad(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

std::vector<Point3> canonical_layout(int keypoints, double spacing) {
  const int columns = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(keypoints))));
  std::vector<Point3> out;
  Point3 centre = Point3::Zero();
  for (int k = 0; k < keypoints; ++k) {
    const int col = k % columns, row = k / columns;
    out.emplace_back(col * spacing, row * spacing,
                     0.3 * spacing * (std::cos(1.3 * col) + std::sin(0.9 * row + 0.4)));
    centre += out.back();
  }
  centre /= static_cast<double>(keypoints);
  for (auto& p : out) p -= centre;
  return out;
}

RigidTransform random_transform(Rng& rng, double max_rotation_deg, double max_translation) {
  Point3 axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-12) axis = Point3::UnitZ();
  axis.normalize();
  const double angle = rng.uniform() * max_rotation_deg * std::numbers::pi / 180.0;
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  for (int i = 0; i < 3; ++i) t.translation[i] = rng.uniform(-max_translation, max_translation);
  return t;
}

}  // namespace

void validate(const SyntheticConfig& c) {
  auto fail = [](const std::string& what) { throw InvalidArgument("synthetic config: " + what); };
  if (c.identities < 2) fail("identities must be >= 2");
  if (c.expressions < 2) fail("expressions must be >= 2 (neutral included)");
  if (c.keypoints < 3) fail("keypoints must be >= 3");
  if (c.dimension < 1) fail("dimension must be >= 1");
  if (c.scans_per_expression < 1) fail("scans_per_expression must be >= 1");
  if (c.subspace_rank < 0 || c.subspace_rank > c.dimension) fail("subspace_rank out of range");
  if (!(c.identity_separation >= 0)) fail("identity_separation must be >= 0");
  if (!(c.expression_scale >= 0)) fail("expression_scale must be >= 0");
  if (!(c.expression_perturbation >= 0)) fail("expression_perturbation must be >= 0");
  if (!(c.keypoint_spread >= 0)) fail("keypoint_spread must be >= 0");
  if (!(c.noise_sigma >= 0)) fail("noise sigma must be >= 0");
  if (!(c.dropout >= 0) || !(c.dropout < 1)) fail("dropout must lie in [0, 1)");
  if (!(c.grid_spacing > 0)) fail("grid_spacing must be positive");
  if (!(c.keypoint_jitter >= 0) || !(c.max_rotation_deg >= 0) || !(c.max_translation >= 0))
    fail("jitter, rotation and translation must be >= 0");
  if (c.training_identities < 0) fail("training_identities must be >= 0");
}

int SyntheticTruth::subject_index(const std::string& subject) const {
  const auto it = std::find(subjects.begin(), subjects.end(), subject);
  if (it == subjects.end()) throw InvalidArgument("unknown subject '" + subject + "'");
  return static_cast<int>(it - subjects.begin());
}

int SyntheticTruth::expression_index(const std::string& label) const {
  const auto it = std::find(expressions.begin(), expressions.end(), label);
  if (it == expressions.end()) throw InvalidArgument("unknown expression '" + label + "'");
  return static_cast<int>(it - expressions.begin());
}

World generate_world(const SyntheticConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(seed);
  const Eigen::Index d = config.dimension;
  const Eigen::Index rank = config.subspace_rank > 0 ? config.subspace_rank : d;
  const double spread = config.identity_spread > 0
                            ? config.identity_spread
                            : 1.5 * config.identity_separation / std::sqrt(2.0 * rank);

  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, rank);
  if (rank < d) {
    Eigen::MatrixXd g(d, rank);
    for (Eigen::Index c = 0; c < rank; ++c) g.col(c) = rng.normal_vector(d, 1.0);
    basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(d, rank);
  }

  World world;
  SyntheticTruth& truth = world.truth;
  truth.config = config;
  truth.seed = seed;
  for (int s = 0; s < config.identities; ++s) truth.subjects.push_back("s" + pad(s, 3));
  truth.expressions.push_back(kNeutral);
  for (int e = 1; e < config.expressions; ++e) truth.expressions.push_back("expr" + std::to_string(e));
  truth.layout = canonical_layout(config.keypoints, config.grid_spacing);

  std::vector<Vector> base;
  for (int k = 0; k < config.keypoints; ++k) base.push_back(rng.normal_vector(d, config.keypoint_spread));

  // Identity vectors with a pairwise separation floor per key-point.
  std::vector<std::vector<Vector>> latent(static_cast<std::size_t>(config.identities));
  truth.identity.resize(static_cast<std::size_t>(config.identities));
  for (int s = 0; s < config.identities; ++s) {
    for (int k = 0; k < config.keypoints; ++k) {
      if (config.coherent_keypoints && k > 0) {
        latent[static_cast<std::size_t>(s)].push_back(latent[static_cast<std::size_t>(s)][0]);
        truth.identity[static_cast<std::size_t>(s)].push_back(base[static_cast<std::size_t>(k)] +
                                                              basis * latent[static_cast<std::size_t>(s)][0]);
        continue;
      }
      Vector z;
      int attempts = 0;
      while (true) {
        z = rng.normal_vector(rank, spread);
        bool ok = true;
        for (int t = 0; t < s && ok; ++t)
          ok = (z - latent[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]).norm() >=
               config.identity_separation;
        if (ok) break;
        if (++attempts > 100000)
          throw InvalidArgument("synthetic config: identity separation floor cannot be met");
      }
      latent[static_cast<std::size_t>(s)].push_back(z);
      truth.identity[static_cast<std::size_t>(s)].push_back(base[static_cast<std::size_t>(k)] + basis * z);
    }
  }

  truth.offsets.assign(static_cast<std::size_t>(config.expressions), {});
  for (int e = 0; e < config.expressions; ++e) {
    for (int k = 0; k < config.keypoints; ++k) {
      if (e == 0) {
        truth.offsets[0].push_back(Vector::Zero(d));
        continue;
      }
      if (config.coherent_keypoints && k > 0) {
        truth.offsets[static_cast<std::size_t>(e)].push_back(truth.offsets[static_cast<std::size_t>(e)][0]);
        continue;
      }
      Vector dir = rng.normal_vector(rank, 1.0);
      while (dir.norm() < 1e-12) dir = rng.normal_vector(rank, 1.0);
      const double norm = config.expression_scale * rng.uniform(1.0, 1.5);
      truth.offsets[static_cast<std::size_t>(e)].push_back(basis * (dir.normalized() * norm));
    }
  }

  truth.subject_offsets.resize(static_cast<std::size_t>(config.identities));
  for (int s = 0; s < config.identities; ++s) {
    auto& mine = truth.subject_offsets[static_cast<std::size_t>(s)];
    mine = truth.offsets;
    if (config.expression_perturbation > 0)
      for (int e = 1; e < config.expressions; ++e)
        for (auto& v : mine[static_cast<std::size_t>(e)])
          v += basis * rng.normal_vector(rank, config.expression_perturbation);
  }

  std::uint64_t next_descriptor = 0, next_ensemble = 0;
  for (int s = 0; s < config.identities; ++s) {
    Collection col;
    col.id = CollectionId{static_cast<std::uint64_t>(s)};
    col.subject = truth.subjects[static_cast<std::size_t>(s)];
    for (int e = 0; e < config.expressions; ++e) {
      for (int r = 0; r < config.scans_per_expression; ++r) {
        Ensemble ens;
        ens.id = EnsembleId{next_ensemble++};
        ens.subject = col.subject;
        ens.expression.label = truth.expressions[static_cast<std::size_t>(e)];
        ens.scan = col.subject + "_" + ens.expression.label + (r > 0 ? "_" + std::to_string(r) : "");

        ScanTruth st{col.subject, ens.scan, ens.expression.label,
                     random_transform(rng, config.max_rotation_deg, config.max_translation), {}};

        std::vector<int> kept;
        do {
          kept.clear();
          for (int k = 0; k < config.keypoints; ++k)
            if (rng.uniform() >= config.dropout) kept.push_back(k);
        } while (kept.size() < 3);
        for (std::size_t i = kept.size(); i > 1; --i) std::swap(kept[i - 1], kept[rng.below(i)]);

        for (const int k : kept) {
          Descriptor desc;
          desc.id = DescriptorId{next_descriptor++};
          desc.ensemble = ens.id;
          desc.collection = col.id;
          desc.vector = truth.identity[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)] +
                        truth.subject_offsets[static_cast<std::size_t>(s)][static_cast<std::size_t>(e)]
                                             [static_cast<std::size_t>(k)];
          if (config.noise_sigma > 0) desc.vector += rng.normal_vector(d, config.noise_sigma);
          Point3 local = truth.layout[static_cast<std::size_t>(k)];
          if (config.keypoint_jitter > 0)
            local += Point3(rng.normal(), rng.normal(), rng.normal()) * config.keypoint_jitter;
          desc.keypoint = st.transform.apply(local);
          truth.keypoint_of[desc.id] = k;
          truth.subject_of[desc.id] = s;
          st.keypoint_labels.push_back(k);
          ens.descriptors.push_back(std::move(desc));
        }
        truth.scans.push_back(std::move(st));
        col.ensembles.push_back(std::move(ens));
      }
    }
    world.collections.push_back(std::move(col));
  }
  return world;
}

WorldSplit split_world(const World& world, int training_identities) {
  if (training_identities < 0 || training_identities > static_cast<int>(world.collections.size()))
    throw InvalidArgument("split_world: training_identities out of range");
  WorldSplit out;
  for (std::size_t i = 0; i < world.collections.size(); ++i) {
    const auto& c = world.collections[i];
    if (static_cast<int>(i) < training_identities) {
      out.training.push_back(c);
      continue;
    }
    bool gallery_taken = false;
    for (const auto& e : c.ensembles) {
      if (e.expression.neutral()) {
        if (!gallery_taken) out.gallery.push_back(e);
        gallery_taken = true;
      } else {
        out.probes.push_back(e);
      }
    }
  }
  return out;
}

std::vector<std::size_t> brute_knn(const Vector& query, const std::vector<Vector>& points,
                                   std::size_t k) {
  if (k > points.size()) throw InvalidArgument("brute_knn: k exceeds the number of points");
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < query.size(); ++j) {
      const double diff = query[j] - points[i][j];
      sum += diff * diff;
    }
    all.emplace_back(sum, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

double partition_quality(const std::vector<EquivalenceSet>& sets, const SyntheticTruth& truth) {
  if (sets.empty()) throw InvalidArgument("partition_quality: no sets");
  std::size_t agree = 0, total = 0;
  for (const auto& s : sets) {
    std::map<int, std::size_t> counts;
    for (const auto m : s.members) ++counts[truth.keypoint_of.at(m)];
    std::size_t best = 0;
    for (const auto& [_, n] : counts) best = std::max(best, n);
    agree += best;
    total += s.members.size();
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

double exact_path_oracle(const Vector& x, const Vector& y, const Model& model) {
  if (model.sets().size() > 64)
    throw InvalidArgument("exact_path_oracle: model has more than 64 equivalence sets");

  auto cost = [&](const Vector& de, const Vector& b1, const Vector& b2, const Vector& dx) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double v = ((de[k] - x[k]) + (b2[k] - b1[k])) + (y[k] - dx[k]);
      sum += v * v;
    }
    return std::sqrt(sum);
  };

  double direct = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) direct += (x[k] - y[k]) * (x[k] - y[k]);
  double best = std::sqrt(direct);

  auto through = [&](const EquivalenceSet& in, const EquivalenceSet& out) {
    const Vector& b1 = model.descriptor(in.bridging).vector;
    const Vector& b2 = model.descriptor(out.bridging).vector;
    for (const auto e : in.members)
      for (const auto g : out.members)
        best = std::min(best, cost(model.descriptor(e).vector, b1, b2, model.descriptor(g).vector));
  };

  for (const auto& s : model.sets()) through(s, s);
  for (const auto& link : model.ir_links()) {
    through(model.set(link.a), model.set(link.b));
    through(model.set(link.b), model.set(link.a));
  }
  return best;
}

}  // namespace eqgraph
