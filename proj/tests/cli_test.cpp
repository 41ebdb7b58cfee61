#include "eqgraph/cli.hpp"
#include "eqgraph/io.hpp"

#include "doctest.h"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>

using namespace eqgraph;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"eqgraph"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("eqgraph_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("end to end") {
  TempDir dir;
  write_file(dir / "config.json", R"({"identities": 8, "training_identities": 4, "dimension": 12})");
  auto r = run({"synth", "--config", dir / "config.json", "--seed", "3", "--out", dir / "all.jsonl", "--truth",
                dir / "truth.json", "--split-dir", dir / "split"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  for (const char* f : {"train.jsonl", "probes.jsonl", "gallery.jsonl", "probe_labels.csv", "gallery_labels.csv"})
    CHECK(fs::exists(dir.path / "split" / f));
  CHECK(load_descriptors(dir / "all.jsonl").collections.size() == 8);

  r = run({"build", "--train", dir / "split/train.jsonl", "--out", dir / "model.bin", "--pca-k", "8"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const Model model = load_model(dir / "model.bin");
  CHECK(model.collections().size() == 4);
  REQUIRE(model.projection().has_value());
  CHECK(model.dimension() == 8);

  r = run({"match", "--model", dir / "model.bin", "--probes", dir / "split/probes.jsonl", "--gallery",
           dir / "split/gallery.jsonl", "--out", dir / "dissim.csv"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  r = run({"match", "--model", dir / "model.bin", "--probes", dir / "split/probes.jsonl", "--gallery",
           dir / "split/gallery.jsonl", "--out", dir / "plain.csv", "--plain"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto m = load_matrix_csv(dir / "dissim.csv");
  CHECK(m.values.rows() == 12);
  CHECK(m.values.cols() == 4);

  r = run({"eval", "--dissim", dir / "dissim.csv", "--probe-labels", dir / "split/probe_labels.csv",
           "--gallery-labels", dir / "split/gallery_labels.csv", "--cmc", dir / "cmc.csv", "--roc", dir / "roc.csv",
           "--summary", dir / "summary.json", "--baseline", dir / "plain.csv"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
  CHECK(summary["probes"] == 12);
  CHECK(summary["gallery"] == 4);
  CHECK(summary["rank1"].get<double>() >= 0.9);
  CHECK(summary.contains("baseline"));
  CHECK(summary.contains("rank1_gap"));
  CHECK(read_file(dir / "cmc.csv").rfind("rank,rate\n1,", 0) == 0);
  CHECK(read_file(dir / "roc.csv").rfind("far,vr,threshold\n0,0,", 0) == 0);

  SUBCASE("data errors exit 2") {
    write_file(dir / "broken.jsonl", "{oops\n");
    r = run({"build", "--train", dir / "broken.jsonl", "--out", dir / "x.bin"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("code=2") != std::string::npos);
    CHECK(r.err.find("line 1") != std::string::npos);

    r = run({"match", "--model", dir / "missing.bin", "--probes", dir / "split/probes.jsonl", "--gallery",
             dir / "split/gallery.jsonl", "--out", dir / "x.csv"});
    CHECK(r.code == kExitData);

    std::string bytes = read_file(dir / "model.bin");
    bytes[bytes.size() - 3] = static_cast<char>(bytes[bytes.size() - 3] ^ 1);
    write_file(dir / "bad.bin", bytes);
    r = run({"match", "--model", dir / "bad.bin", "--probes", dir / "split/probes.jsonl", "--gallery",
             dir / "split/gallery.jsonl", "--out", dir / "x.csv"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("checksum") != std::string::npos);

    r = run({"build", "--train", dir / "split/train.jsonl", "--out", dir / "x.bin", "--pca-k", "40"});
    CHECK(r.code == kExitData);
  }
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"build", "--bogus"}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  const auto r = run({"build", "--train", "x.jsonl"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("code=1") != std::string::npos);
  CHECK(run({"--help"}).code == kExitOk);
}
