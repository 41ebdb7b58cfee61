#include "eqgraph/io.hpp"

#include "eqgraph/error.hpp"

#include "json.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace eqgraph {

using nlohmann::json;

namespace {

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

double finite_number(const json& v, std::size_t line, const char* field) {
  if (!v.is_number()) line_error(line, std::string(field) + " must hold numbers");
  const double x = v.get<double>();
  if (!std::isfinite(x)) line_error(line, std::string(field) + " holds a non-finite value");
  return x;
}

std::string string_field(const json& rec, const char* key, std::size_t line) {
  const auto it = rec.find(key);
  if (it == rec.end() || !it->is_string() || it->get_ref<const std::string&>().empty())
    line_error(line, std::string("missing or empty string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace

LoadedDescriptors read_descriptors(std::istream& in) {
  struct ScanGroup {
    std::string scan;
    std::string expression;
    std::vector<Descriptor> descriptors;
  };
  struct SubjectGroup {
    std::string subject;
    std::vector<ScanGroup> scans;
    std::unordered_map<std::string, std::size_t> scan_index;
  };
  std::vector<SubjectGroup> subjects;
  std::unordered_map<std::string, std::size_t> subject_index;
  std::unordered_map<std::string, std::string> scan_owner;

  LoadedDescriptors out;
  std::string text;
  std::size_t line = 0, records = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      line_error(line, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) line_error(line, "record is not a JSON object");

    const std::string subject = string_field(rec, "subject_id", line);
    const std::string scan = string_field(rec, "scan_id", line);
    const std::string expression = string_field(rec, "expression", line);

    const auto kp = rec.find("keypoint");
    if (kp == rec.end() || !kp->is_array() || kp->size() != 3)
      line_error(line, "keypoint must be an array of 3 numbers");
    const auto vec = rec.find("vector");
    if (vec == rec.end() || !vec->is_array() || vec->empty())
      line_error(line, "vector must be a non-empty array of numbers");

    Descriptor d;
    for (int i = 0; i < 3; ++i) d.keypoint[i] = finite_number((*kp)[i], line, "keypoint");
    d.vector.resize(static_cast<Eigen::Index>(vec->size()));
    for (std::size_t i = 0; i < vec->size(); ++i)
      d.vector[static_cast<Eigen::Index>(i)] = finite_number((*vec)[i], line, "vector");
    if (out.dimension == 0) {
      out.dimension = static_cast<int>(vec->size());
    } else if (static_cast<int>(vec->size()) != out.dimension) {
      line_error(line, "vector has " + std::to_string(vec->size()) + " entries, expected " +
                           std::to_string(out.dimension));
    }

    if (const auto owner = scan_owner.find(scan); owner != scan_owner.end() && owner->second != subject)
      line_error(line, "scan '" + scan + "' already belongs to subject '" + owner->second + "'");
    scan_owner[scan] = subject;

    auto [sit, new_subject] = subject_index.try_emplace(subject, subjects.size());
    if (new_subject) subjects.push_back({subject, {}, {}});
    SubjectGroup& sg = subjects[sit->second];
    auto [cit, new_scan] = sg.scan_index.try_emplace(scan, sg.scans.size());
    if (new_scan) sg.scans.push_back({scan, expression, {}});
    ScanGroup& scan_group = sg.scans[cit->second];
    if (scan_group.expression != expression)
      line_error(line, "scan '" + scan + "' mixes expressions '" + scan_group.expression + "' and '" +
                           expression + "'");
    scan_group.descriptors.push_back(std::move(d));
    ++records;
  }
  if (records == 0) throw DataError("descriptor file holds no records");

  std::uint64_t next_descriptor = 0, next_ensemble = 0;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    Collection c;
    c.id = CollectionId{s};
    c.subject = subjects[s].subject;
    for (auto& sg : subjects[s].scans) {
      Ensemble e;
      e.id = EnsembleId{next_ensemble++};
      e.subject = c.subject;
      e.scan = sg.scan;
      e.expression = Expression{sg.expression};
      for (auto& d : sg.descriptors) {
        d.id = DescriptorId{next_descriptor++};
        d.ensemble = e.id;
        d.collection = c.id;
        e.descriptors.push_back(std::move(d));
      }
      c.ensembles.push_back(std::move(e));
    }
    if (!c.has_neutral()) out.warnings.push_back("subject '" + c.subject + "' has no neutral scan");
    out.collections.push_back(std::move(c));
  }
  return out;
}

LoadedDescriptors load_descriptors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_descriptors(in);
}

void write_descriptors(std::ostream& out, const std::vector<Collection>& collections) {
  for (const auto& c : collections)
    for (const auto& e : c.ensembles)
      for (const auto& d : e.descriptors) {
        json rec;
        rec["subject_id"] = e.subject;
        rec["scan_id"] = e.scan;
        rec["expression"] = e.expression.label;
        rec["keypoint"] = {d.keypoint.x(), d.keypoint.y(), d.keypoint.z()};
        rec["vector"] = std::vector<double>(d.vector.data(), d.vector.data() + d.vector.size());
        out << rec.dump() << '\n';
      }
}

void save_descriptors(const std::filesystem::path& path, const std::vector<Collection>& collections) {
  std::ostringstream out;
  write_descriptors(out, collections);
  write_file(path, out.str());
}

std::vector<Ensemble> flatten(const std::vector<Collection>& collections) {
  std::vector<Ensemble> out;
  for (const auto& c : collections) out.insert(out.end(), c.ensembles.begin(), c.ensembles.end());
  return out;
}

std::vector<Collection> group_by_subject(const std::vector<Ensemble>& ensembles) {
  std::vector<Collection> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& e : ensembles) {
    auto [it, fresh] = index.try_emplace(e.subject, out.size());
    if (fresh) {
      Collection c;
      c.id = CollectionId{out.size()};
      c.subject = e.subject;
      out.push_back(std::move(c));
    }
    Ensemble copy = e;
    for (auto& d : copy.descriptors) d.collection = out[it->second].id;
    out[it->second].ensembles.push_back(std::move(copy));
  }
  return out;
}

Eigen::MatrixXd stack_vectors(const std::vector<Collection>& collections) {
  std::size_t rows = 0;
  Eigen::Index cols = 0;
  for (const auto& c : collections)
    for (const auto& e : c.ensembles)
      for (const auto& d : e.descriptors) {
        if (rows == 0) cols = d.vector.size();
        else if (d.vector.size() != cols) throw DimensionMismatch("stack_vectors: mixed dimensions");
        ++rows;
      }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), cols);
  Eigen::Index r = 0;
  for (const auto& c : collections)
    for (const auto& e : c.ensembles)
      for (const auto& d : e.descriptors) out.row(r++) = d.vector.transpose();
  return out;
}

void project_descriptors(std::vector<Collection>& collections, const PcaBasis& basis) {
  for (auto& c : collections)
    for (auto& e : c.ensembles)
      for (auto& d : e.descriptors) d.vector = pca_project(d.vector, basis);
}

// ---------------------------------------------------------------------------
// Synthetic config and truth

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& field, std::vector<std::string>& seen) {
  const auto it = j.find(key);
  seen.emplace_back(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw DataError("");
    } else if constexpr (std::is_same_v<T, int>) {
      if (!it->is_number_integer()) throw DataError("");
    } else {
      if (!it->is_number()) throw DataError("");
    }
    field = it->get<T>();
  } catch (const std::exception&) {
    throw DataError(std::string("config key '") + key + "' has the wrong type");
  }
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

SyntheticConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("config: expected a JSON object");
  SyntheticConfig c;
  std::vector<std::string> seen;
  read_key(j, "identities", c.identities, seen);
  read_key(j, "expressions", c.expressions, seen);
  read_key(j, "keypoints", c.keypoints, seen);
  read_key(j, "dimension", c.dimension, seen);
  read_key(j, "scans_per_expression", c.scans_per_expression, seen);
  read_key(j, "identity_separation", c.identity_separation, seen);
  read_key(j, "identity_spread", c.identity_spread, seen);
  read_key(j, "expression_scale", c.expression_scale, seen);
  read_key(j, "expression_perturbation", c.expression_perturbation, seen);
  read_key(j, "keypoint_spread", c.keypoint_spread, seen);
  read_key(j, "subspace_rank", c.subspace_rank, seen);
  read_key(j, "coherent_keypoints", c.coherent_keypoints, seen);
  read_key(j, "noise_sigma", c.noise_sigma, seen);
  read_key(j, "dropout", c.dropout, seen);
  read_key(j, "grid_spacing", c.grid_spacing, seen);
  read_key(j, "keypoint_jitter", c.keypoint_jitter, seen);
  read_key(j, "max_rotation_deg", c.max_rotation_deg, seen);
  read_key(j, "max_translation", c.max_translation, seen);
  read_key(j, "training_identities", c.training_identities, seen);
  for (const auto& [key, value] : j.items())
    if (std::find(seen.begin(), seen.end(), key) == seen.end())
      throw DataError("config: unknown key '" + key + "'");
  try {
    validate(c);
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return c;
}

SyntheticConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

namespace {

json config_json(const SyntheticConfig& c) {
  json j;
  j["identities"] = c.identities;
  j["expressions"] = c.expressions;
  j["keypoints"] = c.keypoints;
  j["dimension"] = c.dimension;
  j["scans_per_expression"] = c.scans_per_expression;
  j["identity_separation"] = c.identity_separation;
  j["identity_spread"] = c.identity_spread;
  j["expression_scale"] = c.expression_scale;
  j["expression_perturbation"] = c.expression_perturbation;
  j["keypoint_spread"] = c.keypoint_spread;
  j["subspace_rank"] = c.subspace_rank;
  j["coherent_keypoints"] = c.coherent_keypoints;
  j["noise_sigma"] = c.noise_sigma;
  j["dropout"] = c.dropout;
  j["grid_spacing"] = c.grid_spacing;
  j["keypoint_jitter"] = c.keypoint_jitter;
  j["max_rotation_deg"] = c.max_rotation_deg;
  j["max_translation"] = c.max_translation;
  j["training_identities"] = c.training_identities;
  return j;
}

}  // namespace

std::string config_to_json(const SyntheticConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string truth_to_json(const SyntheticTruth& truth) {
  json j;
  j["config"] = config_json(truth.config);
  j["seed"] = truth.seed;
  j["subjects"] = truth.subjects;
  j["expressions"] = truth.expressions;

  json identities = json::object();
  for (std::size_t s = 0; s < truth.subjects.size(); ++s) {
    json per = json::array();
    for (const auto& v : truth.identity[s]) per.push_back(vec_json(v));
    identities[truth.subjects[s]] = std::move(per);
  }
  j["identities"] = std::move(identities);

  json offsets = json::object();
  for (std::size_t e = 0; e < truth.expressions.size(); ++e) {
    json per = json::array();
    for (const auto& v : truth.offsets[e]) per.push_back(vec_json(v));
    offsets[truth.expressions[e]] = std::move(per);
  }
  j["offsets"] = std::move(offsets);

  if (truth.config.expression_perturbation > 0.0) {
    json subject_offsets = json::object();
    for (std::size_t s = 0; s < truth.subjects.size(); ++s) {
      json per_expr = json::object();
      for (std::size_t e = 0; e < truth.expressions.size(); ++e) {
        json per = json::array();
        for (const auto& v : truth.subject_offsets[s][e]) per.push_back(vec_json(v));
        per_expr[truth.expressions[e]] = std::move(per);
      }
      subject_offsets[truth.subjects[s]] = std::move(per_expr);
    }
    j["subject_offsets"] = std::move(subject_offsets);
  }

  json layout = json::array();
  for (const auto& p : truth.layout) layout.push_back({p.x(), p.y(), p.z()});
  j["layout"] = std::move(layout);

  json scans = json::array();
  for (const auto& s : truth.scans) {
    json r = json::array();
    for (int i = 0; i < 3; ++i)
      r.push_back({s.transform.rotation(i, 0), s.transform.rotation(i, 1), s.transform.rotation(i, 2)});
    scans.push_back({{"subject_id", s.subject},
                     {"scan_id", s.scan},
                     {"expression", s.expression},
                     {"rotation", std::move(r)},
                     {"translation",
                      {s.transform.translation.x(), s.transform.translation.y(),
                       s.transform.translation.z()}},
                     {"keypoint_labels", s.keypoint_labels}});
  }
  j["scans"] = std::move(scans);
  return j.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_csv_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\"\r\n") != std::string::npos)
    throw DataError("identifier '" + id + "' cannot be written to CSV");
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_labels(std::ostream& out, const std::vector<Ensemble>& ensembles) {
  out << "id,subject\n";
  for (const auto& e : ensembles) {
    check_csv_id(e.scan);
    check_csv_id(e.subject);
    out << e.scan << ',' << e.subject << '\n';
  }
}

std::map<std::string, std::string> read_labels(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(in, text) || strip_cr(text) != "id,subject")
    throw DataError("labels: expected header 'id,subject'");
  ++line;
  while (std::getline(in, text)) {
    ++line;
    text = strip_cr(text);
    if (text.empty()) continue;
    const auto fields = split_csv(text);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      line_error(line, "labels: expected 'id,subject'");
    if (!out.emplace(fields[0], fields[1]).second) line_error(line, "labels: duplicate id '" + fields[0] + "'");
  }
  return out;
}

std::map<std::string, std::string> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_labels(in);
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& out, const CsvMatrix& m) {
  if (static_cast<std::size_t>(m.values.rows()) != m.row_ids.size() ||
      static_cast<std::size_t>(m.values.cols()) != m.column_ids.size())
    throw InvalidArgument("write_matrix_csv: id counts do not match the matrix shape");
  out << "probe";
  for (const auto& id : m.column_ids) {
    check_csv_id(id);
    out << ',' << id;
  }
  out << '\n';
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    check_csv_id(m.row_ids[static_cast<std::size_t>(r)]);
    out << m.row_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) out << ',' << format_number(m.values(r, c));
    out << '\n';
  }
}

CsvMatrix read_matrix_csv(std::istream& in) {
  CsvMatrix m;
  std::string text;
  if (!std::getline(in, text)) throw DataError("matrix: empty file");
  auto header = split_csv(strip_cr(text));
  if (header.size() < 2 || header[0] != "probe") throw DataError("line 1: matrix: expected header 'probe,<ids>'");
  m.column_ids.assign(header.begin() + 1, header.end());

  std::vector<std::vector<double>> rows;
  std::size_t line = 1;
  while (std::getline(in, text)) {
    ++line;
    text = strip_cr(text);
    if (text.empty()) continue;
    const auto fields = split_csv(text);
    if (fields.size() != header.size())
      line_error(line, "matrix: expected " + std::to_string(header.size()) + " fields");
    m.row_ids.push_back(fields[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      const auto& f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v))
        line_error(line, "matrix: bad number '" + f + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.column_ids.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

CsvMatrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_matrix_csv(in);
}

// ---------------------------------------------------------------------------
// Binary model container

namespace {

constexpr char kMagic[8] = {'E', 'Q', 'G', 'R', 'A', 'P', 'H', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 4;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_.append(s);
  }
  void vec(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = count(1);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Vector vec(std::size_t n) {
    need(n * 8);
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    return v;
  }
  /// Element count followed by at least `element_size` bytes per element.
  std::size_t count(std::size_t element_size) {
    const auto n = u64();
    if (element_size > 0 && n > (bytes_.size() - pos_) / element_size) throw DataError("model: truncated payload");
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("model: truncated payload");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_model(const Model& model) {
  Writer w;
  w.i32(model.dimension());

  const BuildParams& p = model.params();
  w.f64(p.correspondence.e_th);
  w.i32(p.correspondence.max_iters);
  w.f64(p.correspondence.convergence_eps);
  w.f64(p.correspondence.vicinity_radius);
  w.i32(p.correspondence.seed_pool);
  w.i32(p.diameter_threshold);
  w.f64(p.lambda_min);
  w.f64(p.oversize_factor);
  w.f64(p.min_size_fraction);
  w.u8(p.topology == LinkTopology::hub ? 1 : 0);
  w.str(p.hub_subject);

  const auto& proj = model.projection();
  w.u8(proj ? 1 : 0);
  if (proj) {
    w.i32(proj->k());
    w.i32(proj->raw_dimension());
    w.vec(proj->mean);
    for (Eigen::Index r = 0; r < proj->components.rows(); ++r)
      for (Eigen::Index c = 0; c < proj->components.cols(); ++c) w.f64(proj->components(r, c));
  }

  w.u64(model.collections().size());
  for (const auto& c : model.collections()) {
    w.u64(c.id.value);
    w.str(c.subject);
    w.u64(c.ensembles.size());
    for (const auto& e : c.ensembles) {
      w.u64(e.id.value);
      w.str(e.subject);
      w.str(e.scan);
      w.str(e.expression.label);
      w.u64(e.descriptors.size());
      for (const auto& d : e.descriptors) {
        w.u64(d.id.value);
        w.u64(d.ensemble.value);
        w.u64(d.collection.value);
        for (int i = 0; i < 3; ++i) w.f64(d.keypoint[i]);
        w.vec(d.vector);
      }
    }
  }

  w.u64(model.sets().size());
  for (const auto& s : model.sets()) {
    w.u64(s.id.value);
    w.u64(s.collection.value);
    w.u64(s.bridging.value);
    w.u64(s.members.size());
    for (const auto& m : s.members) w.u64(m.value);
  }

  w.u64(model.ir_links().size());
  for (const auto& l : model.ir_links()) {
    w.u64(l.a.value);
    w.u64(l.b.value);
  }

  const std::string& payload = w.bytes();
  Writer h;
  for (const char ch : kMagic) h.u8(static_cast<std::uint8_t>(ch));
  h.u32(kModelFormatVersion);
  h.u64(payload.size());
  h.u32(crc32_of(payload));
  h.bytes() += payload;
  return std::move(h.bytes());
}

Model deserialize_model(std::string_view bytes) {
  if (bytes.size() < kHeaderSize) throw DataError("model: truncated header");
  if (bytes.substr(0, 8) != std::string_view(kMagic, 8)) throw DataError("model: not a model file (bad magic)");
  Reader h(bytes.substr(8, kHeaderSize - 8));
  const auto version = h.u32();
  if (version != kModelFormatVersion)
    throw DataError("model: format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kModelFormatVersion) + ")");
  const auto size = h.u64();
  const auto crc = h.u32();
  const auto payload = bytes.substr(kHeaderSize);
  if (payload.size() < size) throw DataError("model: truncated payload");
  if (payload.size() > size) throw DataError("model: trailing bytes after payload");
  if (crc32_of(payload) != crc) throw DataError("model: checksum mismatch");

  Reader r(payload);
  const int dimension = r.i32();

  BuildParams p;
  p.correspondence.e_th = r.f64();
  p.correspondence.max_iters = r.i32();
  p.correspondence.convergence_eps = r.f64();
  p.correspondence.vicinity_radius = r.f64();
  p.correspondence.seed_pool = r.i32();
  p.diameter_threshold = r.i32();
  p.lambda_min = r.f64();
  p.oversize_factor = r.f64();
  p.min_size_fraction = r.f64();
  p.topology = r.u8() == 1 ? LinkTopology::hub : LinkTopology::all_pairs;
  p.hub_subject = r.str();

  std::optional<PcaBasis> projection;
  if (r.u8() == 1) {
    const int k = r.i32(), d_raw = r.i32();
    if (k < 1 || d_raw < k) throw DataError("model: bad projection shape");
    PcaBasis b;
    b.mean = r.vec(static_cast<std::size_t>(d_raw));
    b.components.resize(k, d_raw);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d_raw; ++j) b.components(i, j) = r.f64();
    projection = std::move(b);
  }
  if (dimension < 1) throw DataError("model: bad dimension");

  std::vector<Collection> collections(r.count(8));
  for (auto& c : collections) {
    c.id = CollectionId{r.u64()};
    c.subject = r.str();
    c.ensembles.resize(r.count(8));
    for (auto& e : c.ensembles) {
      e.id = EnsembleId{r.u64()};
      e.subject = r.str();
      e.scan = r.str();
      e.expression = Expression{r.str()};
      e.descriptors.resize(r.count(8 * (6 + static_cast<std::size_t>(dimension))));
      for (auto& d : e.descriptors) {
        d.id = DescriptorId{r.u64()};
        d.ensemble = EnsembleId{r.u64()};
        d.collection = CollectionId{r.u64()};
        for (int i = 0; i < 3; ++i) d.keypoint[i] = r.f64();
        d.vector = r.vec(static_cast<std::size_t>(dimension));
      }
    }
  }

  std::vector<EquivalenceSet> sets(r.count(32));
  for (auto& s : sets) {
    s.id = SetId{r.u64()};
    s.collection = CollectionId{r.u64()};
    s.bridging = DescriptorId{r.u64()};
    s.members.resize(r.count(8));
    for (auto& m : s.members) m = DescriptorId{r.u64()};
  }

  std::vector<IrLink> links(r.count(16));
  for (auto& l : links) {
    l.a = SetId{r.u64()};
    l.b = SetId{r.u64()};
  }
  if (!r.done()) throw DataError("model: payload has unread bytes");

  try {
    return Model(dimension, std::move(collections), std::move(sets), std::move(links), std::move(p),
                 std::move(projection));
  } catch (const Error& e) {
    throw DataError(std::string("model: inconsistent contents: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) { write_file(path, serialize_model(model)); }

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace eqgraph
