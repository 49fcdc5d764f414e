#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "pcir/experiment.hpp"
#include "pcir/io.hpp"

namespace fs = std::filesystem;
using pcir::io::read_file;
using pcir::io::write_file_atomic;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result pcir_cli(const std::string& args) {
  const std::string cmd = std::string(PCIR_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pcir_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// A desk-quick config: one small seed, a couple of epochs.
const char* kTiny =
    "data:\n  train_per_env: 64\n  test_per_class: 32\n  holdout_per_env: 64\n"
    "model:\n  epochs: 3\n  batch_per_env: 16\n  lambda: 0\n"
    "eval:\n  seeds: [3]\n  gap_per_env: 32\n";

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(pcir_cli("").code, 1);
  EXPECT_EQ(pcir_cli("frobnicate").code, 1);
  EXPECT_EQ(pcir_cli("dsep").code, 1);
  EXPECT_EQ(pcir_cli("run --config /nonexistent/cfg.yaml").code, 1);
  EXPECT_EQ(pcir_cli("--help").code, 0);
}

TEST(Cli, MalformedConfigNamesTheKey) {
  const fs::path dir = scratch("badcfg");
  write_file_atomic(dir / "bad.yaml", "model:\n  epochs: 3\n  lamdba: 2\n");
  const Result r = pcir_cli("generate --config " + (dir / "bad.yaml").string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.yaml:3: model.lamdba: unknown key"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, DsepUnconfounded) {
  const Result r = pcir_cli("dsep --builtin unconfounded --query 'Xa _||_ E'");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("independent (2 paths, both blocked)"), std::string::npos) << r.out;
}

TEST(Cli, DsepConfounded) {
  Result r = pcir_cli("dsep --builtin confounded --query 'Xa _||_ E | W'");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\nindependent (4 paths, all blocked)"), std::string::npos) << r.out;
  r = pcir_cli("dsep --builtin confounded --query 'Xa _||_ E'");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("dependent (1 of 4 paths open)"), std::string::npos) << r.out;
}

TEST(Cli, DsepGraphFile) {
  const fs::path dir = scratch("graph");
  write_file_atomic(dir / "g.txt", "A -> C\nB -> C\n");
  Result r = pcir_cli("dsep " + (dir / "g.txt").string() + " --query 'A _||_ B'");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("independent (1 path, blocked)"), std::string::npos) << r.out;
  write_file_atomic(dir / "bad.txt", "A -> C\nB - C\n");
  r = pcir_cli("dsep " + (dir / "bad.txt").string() + " --query 'A _||_ B'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
}

TEST(Cli, Theorem1BothModesPass) {
  const Result r = pcir_cli("dsep --theorem1");
  EXPECT_EQ(r.code, 0);
  std::size_t passes = 0;
  for (auto p = r.out.find("PASS"); p != std::string::npos; p = r.out.find("PASS", p + 1)) ++passes;
  EXPECT_EQ(passes, 2u) << r.out;
}

TEST(Cli, GenerateIsDeterministic) {
  const fs::path dir = scratch("generate");
  write_file_atomic(dir / "c.yaml", kTiny);
  for (const char* out : {"a", "b"})
    ASSERT_EQ(pcir_cli("generate --config " + (dir / "c.yaml").string() + " --out " + (dir / out).string()).code, 0);
  const fs::path a = dir / "a" / "seed3";
  for (const char* f : {"train.csv", "train.meta.json", "holdout.csv", "test_e0.csv", "test_e4.csv", "test_e4.meta.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(dir / "b" / "seed3" / f)) << f;
  }
  const std::string train = read_file(a / "train.csv");
  EXPECT_EQ(train.substr(0, train.find('\n')), "f0,f1,f2,f3,f4,f5,env,label");
}

TEST(Cli, RunWritesReportAndIsDeterministic) {
  const fs::path dir = scratch("run");
  write_file_atomic(dir / "c.yaml", kTiny);
  for (const char* out : {"a", "b"})
    ASSERT_EQ(pcir_cli("run --config " + (dir / "c.yaml").string() + " --out " + (dir / out).string()).code, 0);
  for (const char* f : {"report.json", "scores_seed3.csv", "checkpoint_seed3.json", "reps_seed3.csv"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  const std::string scores = read_file(dir / "a" / "scores_seed3.csv");
  EXPECT_EQ(scores.substr(0, scores.find('\n')), "index,score,label,env");
  // Weight 0: the raw regularizer is logged, the total equals the task loss.
  const auto ckpt = pcir::io::load_checkpoint(dir / "a" / "checkpoint_seed3.json");
  for (const auto& h : ckpt.history) {
    EXPECT_GT(h.pcir, 0.0);
    EXPECT_EQ(h.total, h.task);
  }
  for (const auto& e : fs::directory_iterator(dir / "a"))
    EXPECT_EQ(e.path().filename().string().find(".tmp"), std::string::npos) << e.path();
}

TEST(Cli, SweepRowsAndPlot) {
  const fs::path dir = scratch("sweep");
  write_file_atomic(dir / "c.yaml", kTiny);
  ASSERT_EQ(pcir_cli("sweep --config " + (dir / "c.yaml").string() + " --out " + (dir / "s").string() +
                     " --weights 0,1 --seeds 1,2")
                .code,
            0);
  const auto rows = pcir::experiment::parse_sweep_csv(read_file(dir / "s" / "sweep.csv"));
  EXPECT_EQ(rows.size(), 2u * 2u * 5u);
  ASSERT_EQ(pcir_cli("run --config " + (dir / "c.yaml").string() + " --out " + (dir / "r").string()).code, 0);
  const Result r = pcir_cli("plot " + (dir / "r" / "report.json").string() + " " + (dir / "s" / "sweep.csv").string() +
                            " " + (dir / "r" / "reps_seed3.csv").string() + " --out " + (dir / "fig").string());
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* f : {"auroc_bars.svg", "ablation_sweep.svg", "scatter_reps_seed3.svg"})
    EXPECT_TRUE(fs::exists(dir / "fig" / f)) << f;
}

TEST(Cli, SweepRejectsNegativeWeights) {
  const fs::path dir = scratch("sweepneg");
  write_file_atomic(dir / "c.yaml", kTiny);
  EXPECT_EQ(pcir_cli("sweep --config " + (dir / "c.yaml").string() + " --out " + (dir / "s").string() + " --weights=-1")
                .code,
            1);
}

TEST(Cli, PlotEmptyReportWritesNothing) {
  const fs::path dir = scratch("plotempty");
  write_file_atomic(dir / "m" / "report.json",
                    "{\"config_digest\": \"x\", \"seeds\": [], \"per_env\": [], \"invariance_gap\": 0, "
                    "\"invariance_gap_std\": 0, \"mi_nats\": 0, \"mi_nats_std\": 0, \"lambda\": 0}\n");
  const Result r = pcir_cli("plot " + (dir / "m" / "report.json").string() + " --out " + (dir / "fig").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(dir / "fig"));
}
