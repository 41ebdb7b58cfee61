#include "eqgraph/cli.hpp"

#include "eqgraph/error.hpp"
#include "eqgraph/eval.hpp"
#include "eqgraph/graph_builder.hpp"
#include "eqgraph/io.hpp"
#include "eqgraph/matcher.hpp"
#include "eqgraph/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <ostream>
#include <sstream>

namespace eqgraph {

namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out, truth, split_dir;
};

struct BuildArgs {
  std::string train, out, hub;
  int pca_k = 20;
  int diameter = 2;
  double e_th = 4.0;
  double lambda_min = 0.2;
};

struct MatchArgs {
  std::string model, probes, gallery, out;
  MatchParams params;
};

struct EvalArgs {
  std::string dissim, probe_labels, gallery_labels, cmc, roc, summary, baseline;
};

std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

int report(std::ostream& err, int code, const char* kind, const std::string& message) {
  err << "error: code=" << code << " kind=" << kind << " message=" << one_line(message) << '\n';
  return code;
}

std::string labels_csv(const std::vector<Ensemble>& ensembles) {
  std::ostringstream s;
  write_labels(s, ensembles);
  return s.str();
}

std::string descriptors_jsonl(const std::vector<Collection>& collections) {
  std::ostringstream s;
  write_descriptors(s, collections);
  return s.str();
}

void run_synth(const SynthArgs& a, std::ostream& out) {
  const SyntheticConfig config = a.config.empty() ? SyntheticConfig{} : load_config(a.config);
  World world;
  try {
    world = generate_world(config, a.seed);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  write_file(a.out, descriptors_jsonl(world.collections));
  write_file(a.truth, truth_to_json(world.truth));
  if (!a.split_dir.empty()) {
    const fs::path dir = a.split_dir;
    fs::create_directories(dir);
    if (config.training_identities > config.identities)
      throw DataError("config: training_identities exceeds identities");
    const WorldSplit split = split_world(world, config.training_identities);
    write_file(dir / "train.jsonl", descriptors_jsonl(split.training));
    write_file(dir / "probes.jsonl", descriptors_jsonl(group_by_subject(split.probes)));
    write_file(dir / "gallery.jsonl", descriptors_jsonl(group_by_subject(split.gallery)));
    write_file(dir / "probe_labels.csv", labels_csv(split.probes));
    write_file(dir / "gallery_labels.csv", labels_csv(split.gallery));
  }
  std::size_t descriptors = 0;
  for (const auto& c : world.collections) descriptors += c.descriptor_count();
  out << "synth: " << world.collections.size() << " subjects, " << world.truth.scans.size() << " scans, "
      << descriptors << " descriptors\n";
}

void run_build(const BuildArgs& a, std::ostream& out, std::ostream& err) {
  LoadedDescriptors data = load_descriptors(a.train);
  for (const auto& w : data.warnings) err << "warning: " << one_line(w) << '\n';

  std::optional<PcaBasis> basis;
  if (a.pca_k < 0) throw InvalidArgument("--pca-k must be >= 0");
  if (a.pca_k > 0) {
    const Eigen::MatrixXd samples = stack_vectors(data.collections);
    if (a.pca_k > data.dimension)
      throw DataError("--pca-k " + std::to_string(a.pca_k) + " exceeds the descriptor dimension " +
                      std::to_string(data.dimension) + " (use --pca-k 0 to disable)");
    if (a.pca_k > samples.rows())
      throw DataError("--pca-k " + std::to_string(a.pca_k) + " exceeds the number of training descriptors");
    basis = pca_fit(samples, a.pca_k);
    project_descriptors(data.collections, *basis);
  }

  BuildParams params;
  params.diameter_threshold = a.diameter;
  params.correspondence.e_th = a.e_th;
  params.lambda_min = a.lambda_min;
  if (!a.hub.empty()) {
    params.topology = LinkTopology::hub;
    params.hub_subject = a.hub;
  }
  validate(params);

  BuildResult built = build_model(data.collections, params);
  for (const auto& w : built.report.warnings) err << "warning: " << one_line(w) << '\n';
  const Model& m = built.model;
  const Model model(m.dimension(), m.collections(), m.sets(), m.ir_links(), m.params(), std::move(basis));
  save_model(model, a.out);
  out << "build: " << model.collections().size() << " collections, " << model.sets().size()
      << " equivalence sets, " << model.ir_links().size() << " identity links, "
      << built.report.skipped_collections << " skipped collections\n";
}

std::vector<Ensemble> load_for_matching(const std::string& path, const Model& model, std::ostream& err) {
  LoadedDescriptors data = load_descriptors(path);
  for (const auto& w : data.warnings)
    if (w.find("no neutral scan") == std::string::npos) err << "warning: " << one_line(w) << '\n';
  if (const auto& p = model.projection()) {
    if (data.dimension != p->raw_dimension())
      throw DataError(path + ": descriptors have dimension " + std::to_string(data.dimension) +
                      ", the model expects " + std::to_string(p->raw_dimension()));
    project_descriptors(data.collections, *p);
  } else if (data.dimension != model.dimension()) {
    throw DataError(path + ": descriptors have dimension " + std::to_string(data.dimension) +
                    ", the model expects " + std::to_string(model.dimension()));
  }
  return flatten(data.collections);
}

void run_match(const MatchArgs& a, std::ostream& out, std::ostream& err) {
  validate(a.params);
  const Model model = load_model(a.model);
  const auto probes = load_for_matching(a.probes, model, err);
  const auto gallery = load_for_matching(a.gallery, model, err);
  const DescriptorIndex index(model);
  const DissimilarityMatrix dm = dissimilarity_matrix(probes, gallery, model, index, a.params);
  for (const auto& [r, c] : dm.failures)
    err << "warning: correspondence failed for probe " << dm.probe_ids[r] << " vs gallery "
        << dm.gallery_ids[c] << '\n';
  std::ostringstream csv;
  write_matrix_csv(csv, {dm.probe_ids, dm.gallery_ids, dm.normalized});
  write_file(a.out, csv.str());
  out << "match: " << probes.size() << " probes x " << gallery.size() << " gallery, "
      << dm.failures.size() << " failed cells\n";
}

LabeledMatrix labeled(const CsvMatrix& m, const std::map<std::string, std::string>& probe_labels,
                      const std::map<std::string, std::string>& gallery_labels) {
  LabeledMatrix lm;
  lm.scores = m.values;
  auto lookup = [](const std::map<std::string, std::string>& labels, const std::string& id, const char* side) {
    const auto it = labels.find(id);
    if (it == labels.end()) throw DataError(std::string(side) + " id '" + id + "' has no label");
    return it->second;
  };
  for (const auto& id : m.row_ids) lm.probe_subjects.push_back(lookup(probe_labels, id, "probe"));
  for (const auto& id : m.column_ids) lm.gallery_subjects.push_back(lookup(gallery_labels, id, "gallery"));
  try {
    validate(lm);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  return lm;
}

nlohmann::json summarize(const LabeledMatrix& lm, std::vector<double>* cmc, std::vector<RocPoint>* roc) {
  const auto curve = cmc_curve(lm, static_cast<std::size_t>(lm.scores.cols()));
  const auto points = roc_curve(lm);
  nlohmann::json j;
  j["probes"] = lm.scores.rows();
  j["gallery"] = lm.scores.cols();
  j["rank1"] = curve.front();
  j["rank5"] = curve[std::min<std::size_t>(4, curve.size() - 1)];
  j["vr_at_far_0.001"] = vr_at_far(points, 0.001);
  j["vr_at_far_0.01"] = vr_at_far(points, 0.01);
  if (cmc) *cmc = curve;
  if (roc) *roc = points;
  return j;
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto probe_labels = load_labels(a.probe_labels);
  const auto gallery_labels = load_labels(a.gallery_labels);
  const LabeledMatrix lm = labeled(load_matrix_csv(a.dissim), probe_labels, gallery_labels);
  std::vector<double> cmc;
  std::vector<RocPoint> roc;
  nlohmann::json summary = summarize(lm, &cmc, &roc);

  if (!a.baseline.empty()) {
    const LabeledMatrix base = labeled(load_matrix_csv(a.baseline), probe_labels, gallery_labels);
    nlohmann::json b = summarize(base, nullptr, nullptr);
    summary["rank1_gap"] = summary["rank1"].get<double>() - b["rank1"].get<double>();
    summary["baseline"] = std::move(b);
  }

  std::ostringstream cmc_csv;
  cmc_csv << "rank,rate\n";
  for (std::size_t r = 0; r < cmc.size(); ++r) cmc_csv << (r + 1) << ',' << format_number(cmc[r]) << '\n';
  write_file(a.cmc, cmc_csv.str());

  std::ostringstream roc_csv;
  roc_csv << "far,vr,threshold\n";
  for (const auto& p : roc)
    roc_csv << format_number(p.far) << ',' << format_number(p.vr) << ',' << format_number(p.threshold) << '\n';
  write_file(a.roc, roc_csv.str());

  write_file(a.summary, summary.dump(2) + "\n");
  out << "eval: rank1=" << format_number(summary["rank1"].get<double>())
      << " vr@far0.001=" << format_number(summary["vr_at_far_0.001"].get<double>()) << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expression-invariant matching of descriptor ensembles", "eqgraph"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic descriptor world");
  synth->add_option("--config", sa.config, "World configuration (JSON); defaults when omitted");
  synth->add_option("--seed", sa.seed, "Random seed")->required();
  synth->add_option("--out", sa.out, "Descriptor JSONL output")->required();
  synth->add_option("--truth", sa.truth, "Ground-truth JSON output")->required();
  synth->add_option("--split-dir", sa.split_dir, "Also write train/probe/gallery files and labels here");

  BuildArgs ba;
  auto* build = app.add_subcommand("build", "Train the equivalence graph");
  build->add_option("--train", ba.train, "Training descriptors (JSONL)")->required();
  build->add_option("--out", ba.out, "Model output")->required();
  build->add_option("--pca-k", ba.pca_k, "PCA coefficients kept (0 disables)")->capture_default_str();
  build->add_option("--diameter", ba.diameter, "Maximum ensemble-graph diameter")->capture_default_str();
  build->add_option("--e-th", ba.e_th, "Inlier threshold on transform error (mm)")->capture_default_str();
  build->add_option("--lambda-min", ba.lambda_min, "Algebraic connectivity stop level")->capture_default_str();
  build->add_option("--hub", ba.hub, "Link every collection through this subject only");

  MatchArgs ma;
  auto* match = app.add_subcommand("match", "Score probes against the gallery");
  match->add_option("--model", ma.model, "Model file")->required();
  match->add_option("--probes", ma.probes, "Probe descriptors (JSONL)")->required();
  match->add_option("--gallery", ma.gallery, "Gallery descriptors (JSONL)")->required();
  match->add_option("--out", ma.out, "Dissimilarity matrix (CSV)")->required();
  match->add_option("--top-n", ma.params.top_n, "Pairs summed per ensemble match")->capture_default_str();
  match->add_option("--vote-k", ma.params.vote_k, "Neighbours voting per descriptor")->capture_default_str();
  match->add_option("--refine-iters", ma.params.refine_iters, "Refinement rounds")->capture_default_str();
  match->add_option("--gate-candidates", ma.params.gate_candidates, "Entrance/exit candidates")
      ->capture_default_str();
  match->add_option("--collection-candidates", ma.params.collection_candidates,
                    "Voted collections searched during refinement")
      ->capture_default_str();
  match->add_flag("--plain", ma.params.plain, "Direct distances only, no graph");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "CMC and ROC summaries of a dissimilarity matrix");
  eval->add_option("--dissim", ea.dissim, "Dissimilarity matrix (CSV)")->required();
  eval->add_option("--probe-labels", ea.probe_labels, "Probe labels (CSV)")->required();
  eval->add_option("--gallery-labels", ea.gallery_labels, "Gallery labels (CSV)")->required();
  eval->add_option("--cmc", ea.cmc, "CMC output (CSV)")->required();
  eval->add_option("--roc", ea.roc, "ROC output (CSV)")->required();
  eval->add_option("--summary", ea.summary, "Summary output (JSON)")->required();
  eval->add_option("--baseline", ea.baseline, "Second matrix whose rank-1 gap is reported");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    return report(err, kExitUsage, "usage", e.what());
  }

  try {
    if (synth->parsed()) run_synth(sa, out);
    else if (build->parsed()) run_build(ba, out, err);
    else if (match->parsed()) run_match(ma, out, err);
    else if (eval->parsed()) run_eval(ea, out);
  } catch (const InvalidArgument& e) {
    return report(err, kExitUsage, "usage", e.what());
  } catch (const DataError& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const DimensionMismatch& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const fs::filesystem_error& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const BuildError& e) {
    return report(err, kExitFailure, "build", e.what());
  } catch (const Error& e) {
    return report(err, kExitFailure, "failure", e.what());
  } catch (const std::exception& e) {
    return report(err, kExitFailure, "internal", e.what());
  }
  return kExitOk;
}

}  // namespace eqgraph
