#include "pcir/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "pcir/io.hpp"
#include "pcir/rng.hpp"

namespace pcir::experiment {

namespace {

// Stream ids under each seed.
constexpr std::uint64_t kTrainData = 1;
constexpr std::uint64_t kHoldoutData = 2;
constexpr std::uint64_t kEncoderInit = 3;
constexpr std::uint64_t kTraining = 4;
constexpr std::uint64_t kTestData = 100;

template <typename F>
void parallel_for(std::size_t n, F&& job) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(thread_count()));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            job(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Matrix rows_of(const Matrix& m, const std::vector<Index>& rows, Index limit) {
  const Index n = std::min(limit, static_cast<Index>(rows.size()));
  Matrix out(n, m.cols());
  for (Index i = 0; i < n; ++i) out.row(i) = m.row(rows[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

int thread_count() {
  if (const char* s = std::getenv("PCIR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<data::EnvSpec> test_envs(const ExperimentConfig& cfg) {
  std::vector<data::EnvSpec> envs;
  if (cfg.shift_suite) {
    envs = data::covariate_shift_suite(cfg.scm);
  } else {
    envs.push_back(data::intervene_domain(cfg.scm, 0));
    envs.back().name = "e0";
  }
  if (cfg.domain_shift) envs.push_back(data::domain_shift_env(cfg.scm));
  return envs;
}

SeedData generate(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SeedData d;
  d.train = data::sample_train(cfg.scm, cfg.train_per_env, derive_seed(seed, kTrainData));
  d.holdout = data::sample_train(cfg.scm, cfg.holdout_per_env, derive_seed(seed, kHoldoutData));
  const auto envs = test_envs(cfg);
  for (std::size_t i = 0; i < envs.size(); ++i)
    d.tests.push_back(data::sample_test(cfg.scm, cfg.test_per_class, envs[i], derive_seed(seed, kTestData + i)));
  return d;
}

void write_generated(const SeedData& d, const std::vector<data::EnvSpec>& envs, const std::filesystem::path& dir) {
  if (envs.size() != d.tests.size()) throw ConfigError("write_generated: environment list does not match the data");
  io::write_dataset(d.train, dir / "train.csv");
  io::write_dataset(d.holdout, dir / "holdout.csv");
  for (std::size_t i = 0; i < envs.size(); ++i) io::write_dataset(d.tests[i], dir / ("test_" + envs[i].name + ".csv"));
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SeedData d = generate(cfg, seed);
  const auto envs = test_envs(cfg);

  model::EncoderConfig enc = cfg.encoder;
  enc.seed = derive_seed(seed, kEncoderInit);
  model::TrainConfig train = cfg.train;
  train.seed = derive_seed(seed, kTraining);

  SeedResult r;
  r.fit = model::fit(train, enc, d.train);
  const model::Detector& m = r.fit.model;
  const scoring::ScorerConfig scorer = scoring::make_scorer(cfg.scorer, cfg.k, m, d.train);

  r.run.seed = seed;
  r.run.lambda = cfg.train.lambda;
  r.run.config_digest = cfg.digest();
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const scoring::Scores s = scoring::score_dataset(m, scorer, d.tests[i]);
    r.run.envs.push_back({envs[i].name, eval::auroc(s.of_label(0), s.of_label(1))});
    r.scores.score.insert(r.scores.score.end(), s.score.begin(), s.score.end());
    r.scores.label.insert(r.scores.label.end(), s.label.begin(), s.label.end());
    r.scores.env.insert(r.scores.env.end(), s.env.begin(), s.env.end());
  }

  r.holdout_reps = model::encode(m, d.holdout.features);
  r.holdout_env = d.holdout.env;
  std::vector<Matrix> by_env;
  for (int e : d.holdout.env_ids())
    by_env.push_back(rows_of(r.holdout_reps, d.holdout.rows_of_env(e), cfg.gap_per_env));
  r.run.invariance_gap = eval::invariance_gap(by_env);
  r.run.mi_nats = eval::binned_mi(d.holdout.features, r.holdout_reps, cfg.mi_bins);
  return r;
}

RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult out;
  out.seeds.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), [&](std::size_t i) { out.seeds[i] = run_seed(cfg, cfg.seeds[i]); });
  std::vector<eval::SeedRun> runs;
  for (const auto& s : out.seeds) runs.push_back(s.run);
  out.report = eval::build_report(runs);
  return out;
}

void write_run(const RunResult& r, const std::filesystem::path& dir) {
  for (const auto& s : r.seeds) {
    const std::string tag = fmt::format("seed{}", s.run.seed);
    io::write_file_atomic(dir / ("scores_" + tag + ".csv"), io::scores_csv(s.scores));
    io::write_file_atomic(dir / ("checkpoint_" + tag + ".json"),
                          io::checkpoint_json(s.fit.model, s.fit.history, s.run.config_digest));
    io::write_file_atomic(dir / ("reps_" + tag + ".csv"), io::reps_csv(s.holdout_reps, s.holdout_env));
  }
  // Written last, so a report on disk implies complete per-seed files.
  io::write_file_atomic(dir / "report.json", io::report_json(r.report));
}

std::vector<double> default_grid() { return {0.0, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0}; }

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::vector<double>& weights) {
  if (weights.empty()) throw ConfigError("sweep: weight list must not be empty");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("sweep: weights must be finite and >= 0");
  cfg.validate();
  const std::size_t ns = cfg.seeds.size();
  std::vector<eval::SeedRun> runs(weights.size() * ns);
  parallel_for(runs.size(), [&](std::size_t j) {
    ExperimentConfig c = cfg;
    c.train.lambda = weights[j / ns];
    runs[j] = run_seed(c, cfg.seeds[j % ns]).run;
  });
  std::vector<SweepRow> rows;
  for (const auto& r : runs)
    for (const auto& e : r.envs) rows.push_back({r.lambda, r.seed, e.env, e.auroc, r.invariance_gap, r.mi_nats});
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "lambda,seed,env,auroc,invariance_gap,mi_nats\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{}\n", io::format_double(r.lambda), r.seed, r.env, io::format_double(r.auroc),
                       io::format_double(r.invariance_gap), io::format_double(r.mi_nats));
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "lambda,seed,env,auroc,invariance_gap,mi_nats")
    throw ConfigError("sweep file: header must be lambda,seed,env,auroc,invariance_gap,mi_nats");
  std::vector<SweepRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ConfigError(fmt::format("sweep file:{}: expected 6 fields", lineno));
    try {
      rows.push_back({std::stod(f[0]), std::stoull(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("sweep file:{}: malformed number", lineno));
    }
  }
  return rows;
}

}  // namespace pcir::experiment
