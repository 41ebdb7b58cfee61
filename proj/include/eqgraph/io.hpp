#pragma once

// File formats: descriptor JSONL, synthetic config / truth JSON, label and
// dissimilarity CSVs, and the binary model container.

#include "eqgraph/model.hpp"
#include "eqgraph/pca.hpp"
#include "eqgraph/synth.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace eqgraph {

struct LoadedDescriptors {
  std::vector<Collection> collections;
  int dimension = 0;
  std::vector<std::string> warnings;
};

/// One JSON object per line: subject_id, scan_id, expression, keypoint
/// [x, y, z], vector. Records are grouped into ensembles by scan and into
/// collections by subject, both in order of first appearance; ids are
/// assigned sequentially in that order. Blank lines are skipped. Throws
/// DataError (with the line number) on malformed records, inconsistent
/// dimensions, conflicting expressions within a scan, or an empty file.
LoadedDescriptors read_descriptors(std::istream& in);
LoadedDescriptors load_descriptors(const std::filesystem::path& path);

void write_descriptors(std::ostream& out, const std::vector<Collection>& collections);
void save_descriptors(const std::filesystem::path& path, const std::vector<Collection>& collections);

/// Every ensemble, collection by collection.
std::vector<Ensemble> flatten(const std::vector<Collection>& collections);
/// Wraps loose ensembles into collections by subject (first-appearance order).
std::vector<Collection> group_by_subject(const std::vector<Ensemble>& ensembles);

/// One row per descriptor vector.
Eigen::MatrixXd stack_vectors(const std::vector<Collection>& collections);
void project_descriptors(std::vector<Collection>& collections, const PcaBasis& basis);

/// Unknown keys are a DataError; missing keys keep their defaults.
SyntheticConfig parse_config(std::string_view json);
SyntheticConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const SyntheticConfig& config);
std::string truth_to_json(const SyntheticTruth& truth);

/// "id,subject" CSV mapping ensemble scan ids to subjects.
void write_labels(std::ostream& out, const std::vector<Ensemble>& ensembles);
std::map<std::string, std::string> read_labels(std::istream& in);
std::map<std::string, std::string> load_labels(const std::filesystem::path& path);

/// Locale-independent shortest form with 9 significant digits.
std::string format_number(double value);

struct CsvMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> column_ids;
  Eigen::MatrixXd values;
};

/// Header "probe,<gallery ids...>", then one row per probe.
void write_matrix_csv(std::ostream& out, const CsvMatrix& matrix);
CsvMatrix read_matrix_csv(std::istream& in);
CsvMatrix load_matrix_csv(const std::filesystem::path& path);

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian container: magic, format version, payload size, CRC-32 of
/// the payload, payload. Throws DataError on a bad magic, version mismatch,
/// truncation or checksum failure.
std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// Whole-file helpers; throw DataError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace eqgraph
