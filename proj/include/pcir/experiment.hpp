#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcir/config.hpp"
#include "pcir/datagen.hpp"
#include "pcir/eval.hpp"
#include "pcir/models.hpp"
#include "pcir/scoring.hpp"

namespace pcir::experiment {

/// Test environments of a config: e0 (training environment 0) then e1..e4
/// when the shift suite is on, then the held-out domain when enabled.
std::vector<data::EnvSpec> test_envs(const ExperimentConfig& cfg);

/// All data of one seed. Every sample set has its own derived stream.
struct SeedData {
  data::Dataset train;
  data::Dataset holdout;
  std::vector<data::Dataset> tests;  // aligned with test_envs()
};

SeedData generate(const ExperimentConfig& cfg, std::uint64_t seed);
/// train.csv, holdout.csv and test_<env>.csv, each with its metadata sidecar.
void write_generated(const SeedData& d, const std::vector<data::EnvSpec>& envs, const std::filesystem::path& dir);

struct SeedResult {
  eval::SeedRun run;
  model::FitResult fit;
  /// Scores of every test environment, concatenated in test_envs() order.
  scoring::Scores scores;
  Matrix holdout_reps;
  std::vector<int> holdout_env;
};

/// generate -> fit -> score every test environment -> evaluate.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunResult {
  eval::EvalReport report;
  std::vector<SeedResult> seeds;
};

/// All seeds of the config, in parallel (see thread_count()).
RunResult run(const ExperimentConfig& cfg);

/// Writes report.json plus scores_seed<s>.csv, checkpoint_seed<s>.json and
/// reps_seed<s>.csv per seed.
void write_run(const RunResult& r, const std::filesystem::path& dir);

/// 0 followed by {0.001, 0.01, 0.1, 1, 10, 100}.
std::vector<double> default_grid();

struct SweepRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string env;
  double auroc = 0.0;
  double invariance_gap = 0.0;
  double mi_nats = 0.0;
};

/// One row per (weight, seed, test environment), ordered the same way.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::vector<double>& weights);
/// Header `lambda,seed,env,auroc,invariance_gap,mi_nats`.
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

/// PCIR_THREADS when set to a positive integer, else the hardware thread
/// count (at least 1).
int thread_count();

}  // namespace pcir::experiment
