#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pcir/datagen.hpp"
#include "pcir/eval.hpp"
#include "pcir/models.hpp"
#include "pcir/scoring.hpp"

namespace pcir::io {

/// Shortest text with 17 significant digits ("%.17g"); round-trips exactly.
std::string format_double(double v);

/// Writes to a temporary sibling and renames it over `path`, so readers never
/// see a partial file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Header `f0,...,f{d-1},env,label`, one row per sample.
std::string dataset_csv(const data::Dataset& d);
/// Sidecar with config digest, seed, intervention record and shape.
std::string dataset_metadata_json(const data::Dataset& d);
/// Sidecar path for a dataset CSV: `x.csv` -> `x.meta.json`.
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);
void write_dataset(const data::Dataset& d, const std::filesystem::path& csv_path);
/// Reads features, env and label (plus the sidecar when present). The
/// unmixed features and latent draws are not stored and come back empty.
data::Dataset read_dataset(const std::filesystem::path& csv_path);

/// Header `index,score,label,env`.
std::string scores_csv(const scoring::Scores& s);

/// Header `z0,...,z{k-1},env`.
std::string reps_csv(const Matrix& reps, const std::vector<int>& env);
struct RepsTable {
  Matrix reps;
  std::vector<int> env;
};
RepsTable parse_reps_csv(const std::string& text);

struct Checkpoint {
  model::Detector model;
  std::vector<model::EpochRecord> history;
  std::string config_digest;
};

std::string checkpoint_json(const model::Detector& model, const std::vector<model::EpochRecord>& history,
                            const std::string& config_digest);
Checkpoint parse_checkpoint(const std::string& text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string report_json(const eval::EvalReport& report);
eval::EvalReport parse_report(const std::string& text);

}  // namespace pcir::io
