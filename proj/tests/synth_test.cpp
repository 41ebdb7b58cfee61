#include "eqgraph/error.hpp"
#include "eqgraph/graph_builder.hpp"
#include "eqgraph/synth.hpp"

#include "doctest.h"
#include "support.hpp"

#include <set>

using namespace eqgraph;
using eqtest::vec;

TEST_CASE("noiseless descriptors decompose exactly") {
  SyntheticConfig cfg;
  cfg.identities = 5;
  const World w = generate_world(cfg, 3);
  const auto& t = w.truth;
  REQUIRE(w.collections.size() == 5);
  std::size_t scan = 0;
  for (const auto& c : w.collections) {
    CHECK(c.ensembles.size() == static_cast<std::size_t>(cfg.expressions));
    for (const auto& e : c.ensembles) {
      const auto& st = t.scans[scan++];
      CHECK(st.scan == e.scan);
      const int s = t.subject_index(e.subject), x = t.expression_index(e.expression.label);
      CHECK(e.descriptors.size() == static_cast<std::size_t>(cfg.keypoints));
      for (std::size_t i = 0; i < e.descriptors.size(); ++i) {
        const auto& d = e.descriptors[i];
        const int k = t.keypoint_of.at(d.id);
        CHECK(st.keypoint_labels[i] == k);
        CHECK(t.subject_of.at(d.id) == s);
        const Vector want = t.identity[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)] +
                            t.offsets[static_cast<std::size_t>(x)][static_cast<std::size_t>(k)];
        CHECK((d.vector - want).norm() == 0.0);
        CHECK((d.keypoint - st.transform.apply(t.layout[static_cast<std::size_t>(k)])).norm() <= 1e-9);
      }
    }
  }
  // Neutral offsets are zero; others have norms in [1, 1.5] * scale.
  for (const auto& o : t.offsets[0]) CHECK(o.norm() == 0.0);
  for (std::size_t e = 1; e < t.offsets.size(); ++e)
    for (const auto& o : t.offsets[e]) {
      CHECK(o.norm() >= cfg.expression_scale - 1e-9);
      CHECK(o.norm() <= 1.5 * cfg.expression_scale + 1e-9);
    }
  // Separation floor between identities of one key-point.
  for (int k = 0; k < cfg.keypoints; ++k)
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = a + 1; b < 5; ++b)
        CHECK((t.identity[a][static_cast<std::size_t>(k)] - t.identity[b][static_cast<std::size_t>(k)]).norm() >=
              cfg.identity_separation - 1e-9);
}

TEST_CASE("coherent key-points share one latent") {
  SyntheticConfig cfg;
  cfg.identities = 4;
  cfg.subspace_rank = 5;
  cfg.coherent_keypoints = true;
  const World w = generate_world(cfg, 9);
  const auto& t = w.truth;
  // Identity differences are the same across key-points.
  for (std::size_t k = 1; k < static_cast<std::size_t>(cfg.keypoints); ++k)
    CHECK(((t.identity[1][k] - t.identity[0][k]) - (t.identity[1][0] - t.identity[0][0])).norm() <= 1e-9);
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticConfig cfg;
  cfg.identities = 4;
  cfg.noise_sigma = 0.1;
  cfg.dropout = 0.2;
  const World a = generate_world(cfg, 11), b = generate_world(cfg, 11), c = generate_world(cfg, 12);
  bool differs = false;
  for (std::size_t i = 0; i < a.collections.size(); ++i)
    for (std::size_t e = 0; e < a.collections[i].ensembles.size(); ++e) {
      const auto& x = a.collections[i].ensembles[e];
      const auto& y = b.collections[i].ensembles[e];
      REQUIRE(x.descriptors.size() == y.descriptors.size());
      for (std::size_t d = 0; d < x.descriptors.size(); ++d) {
        CHECK(x.descriptors[d].vector == y.descriptors[d].vector);
        CHECK(x.descriptors[d].keypoint == y.descriptors[d].keypoint);
      }
      const auto& z = c.collections[i].ensembles[e];
      differs = differs || z.descriptors.size() != x.descriptors.size() ||
                z.descriptors[0].vector != x.descriptors[0].vector;
    }
  CHECK(differs);
}

TEST_CASE("dropout") {
  SyntheticConfig cfg;
  cfg.identities = 25;
  cfg.dropout = 0.1;
  const World w = generate_world(cfg, 13);
  std::size_t scans = 0, kept = 0;
  for (const auto& c : w.collections)
    for (const auto& e : c.ensembles) {
      ++scans;
      kept += e.descriptors.size();
      CHECK(e.descriptors.size() >= 3);
      std::set<int> labels;
      for (const auto& d : e.descriptors) labels.insert(w.truth.keypoint_of.at(d.id));
      CHECK(labels.size() == e.descriptors.size());
    }
  CHECK(scans == 100);
  CHECK(static_cast<double>(kept) / static_cast<double>(scans) == doctest::Approx(9.0).epsilon(0.5 / 9.0));
}

TEST_CASE("config validation") {
  SyntheticConfig cfg;
  validate(cfg);
  auto bad = [](auto edit) {
    SyntheticConfig c;
    edit(c);
    CHECK_THROWS_AS(validate(c), InvalidArgument);
  };
  bad([](SyntheticConfig& c) { c.identities = 0; });
  bad([](SyntheticConfig& c) { c.keypoints = 2; });
  bad([](SyntheticConfig& c) { c.dimension = 0; });
  bad([](SyntheticConfig& c) { c.dropout = 1.0; });
  bad([](SyntheticConfig& c) { c.noise_sigma = -1.0; });
  bad([](SyntheticConfig& c) { c.subspace_rank = 21; });

  SyntheticConfig tight;
  tight.identities = 40;
  tight.identity_spread = 0.01;
  CHECK_THROWS_AS(generate_world(tight, 1), InvalidArgument);
}

TEST_CASE("split_world") {
  SyntheticConfig cfg;
  cfg.identities = 6;
  cfg.scans_per_expression = 2;
  const World w = generate_world(cfg, 14);
  const auto s = split_world(w, 4);
  CHECK(s.training.size() == 4);
  CHECK(s.gallery.size() == 2);
  CHECK(s.probes.size() == 2 * 2 * 3);
  for (const auto& g : s.gallery) CHECK(g.expression.neutral());
  for (const auto& p : s.probes) {
    CHECK_FALSE(p.expression.neutral());
    CHECK((p.subject == w.collections[4].subject || p.subject == w.collections[5].subject));
  }
  CHECK_THROWS_AS(split_world(w, 7), InvalidArgument);
}

TEST_CASE("partition_quality") {
  SyntheticTruth t;
  for (std::uint64_t i = 0; i < 4; ++i) t.keypoint_of[DescriptorId{i}] = static_cast<int>(i % 2);
  EquivalenceSet a, b;
  a.members = {DescriptorId{0}, DescriptorId{2}};
  b.members = {DescriptorId{1}, DescriptorId{3}};
  CHECK(partition_quality({a, b}, t) == 1.0);
  a.members = {DescriptorId{0}, DescriptorId{1}};
  b.members = {DescriptorId{2}, DescriptorId{3}};
  CHECK(partition_quality({a, b}, t) == 0.5);
  CHECK_THROWS_AS(partition_quality({}, t), InvalidArgument);
}

TEST_CASE("exact_path_oracle") {
  SyntheticConfig cfg;
  cfg.identities = 3;
  cfg.keypoints = 5;
  const World w = generate_world(cfg, 15);
  const auto built = build_model(w.collections);
  const Model& m = built.model;
  REQUIRE(m.sets().size() <= 64);

  SUBCASE("never above the direct distance") {
    eqtest::Random rng(16);
    for (int i = 0; i < 50; ++i) {
      const Vector x = rng.vector(cfg.dimension, 20.0), y = rng.vector(cfg.dimension, 20.0);
      CHECK(exact_path_oracle(x, y, m) <= (x - y).norm());
    }
  }
  SUBCASE("members of one set") {
    const auto& s = m.sets()[0];
    const Vector& x = m.descriptor(s.members[0]).vector;
    const Vector& y = m.descriptor(s.members[1]).vector;
    CHECK(exact_path_oracle(x, y, m) == 0.0);
  }
  SUBCASE("shifted identity, different expressions") {
    const auto& t = w.truth;
    const Vector ip = eqtest::Random(17).vector(cfg.dimension, 0.5);
    const Vector x = t.identity[0][2] + ip + t.offsets[1][2], y = t.identity[0][2] + ip + t.offsets[3][2];
    CHECK(exact_path_oracle(x, y, m) <= 1e-9);
  }
  SUBCASE("too many sets") {
    SyntheticConfig big;
    big.identities = 7;
    const auto large = build_model(generate_world(big, 18).collections);
    REQUIRE(large.model.sets().size() > 64);
    CHECK_THROWS_AS(exact_path_oracle(vec({0}), vec({0}), large.model), InvalidArgument);
  }
}

TEST_CASE("brute_knn") {
  const std::vector<Vector> pts{vec({0}), vec({2}), vec({1}), vec({1})};
  CHECK(brute_knn(vec({1}), pts, 3) == std::vector<std::size_t>{2, 3, 0});
  CHECK_THROWS_AS(brute_knn(vec({0}), pts, 5), InvalidArgument);
}
