#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcir/datagen.hpp"
#include "pcir/models.hpp"
#include "pcir/scoring.hpp"

namespace pcir {

/// Everything one experiment needs. Loaded from YAML; every key is optional
/// and defaults to the built-in scenario (see configs/default.yaml for the
/// full key list).
struct ExperimentConfig {
  data::ScmConfig scm = data::default_scenario();
  Index train_per_env = 512;
  Index test_per_class = 256;
  /// Held-out normal samples per training environment, used for the
  /// invariance gap and the MI diagnostic.
  Index holdout_per_env = 4096;

  model::EncoderConfig encoder;
  model::TrainConfig train;

  scoring::ScorerKind scorer = scoring::ScorerKind::Knn;
  int k = 2;

  bool shift_suite = true;
  bool domain_shift = false;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int mi_bins = 16;
  /// Rows per environment (taken from the held-out set) for the invariance
  /// gap, whose cost is quadratic in this number.
  Index gap_per_env = 512;

  std::filesystem::path output_dir = "out";

  void validate() const;
  /// Digest of every field that affects results (seeds and output excluded).
  std::string digest() const;
};

/// Default scenario with the compactness objective and kNN scoring.
ExperimentConfig default_experiment();
/// Default scenario with the autoencoder objective and reconstruction scoring.
ExperimentConfig default_autoencoder_experiment();

/// Parses YAML text. Errors name the offending key and its line, prefixed by
/// `source` (normally the file name).
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// YAML text that parses back to `cfg`.
std::string config_yaml(const ExperimentConfig& cfg);

}  // namespace pcir
