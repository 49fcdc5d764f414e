#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pcir/causal.hpp"
#include "pcir/config.hpp"
#include "pcir/experiment.hpp"
#include "pcir/io.hpp"
#include "pcir/plot.hpp"

namespace fs = std::filesystem;
using namespace pcir;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<double> weights;
  std::string builtin;
  std::string graph;
  std::string query;
  bool theorem1 = false;
  std::vector<std::string> inputs;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? default_experiment() : load_config(o.config);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

int cmd_generate(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const auto envs = experiment::test_envs(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = cfg.output_dir / fmt::format("seed{}", seed);
    experiment::write_generated(experiment::generate(cfg, seed), envs, dir);
    fmt::print("wrote {}\n", dir.string());
  }
  return 0;
}

int cmd_run(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const experiment::RunResult r = experiment::run(cfg);
  for (const auto& s : r.seeds)
    for (const auto& w : s.fit.warnings) fmt::print(stderr, "warning (seed {}): {}\n", s.run.seed, w);
  experiment::write_run(r, cfg.output_dir);
  fmt::print("lambda {}  seeds {}  invariance gap {:.4f}  MI {:.4f} nats\n", r.report.lambda, r.report.seeds.size(),
             r.report.invariance_gap, r.report.mi_nats);
  for (const auto& e : r.report.per_env) fmt::print("  {:<8} AUROC {:.4f} +- {:.4f}\n", e.env, e.auroc_mean, e.auroc_std);
  fmt::print("wrote {}\n", (cfg.output_dir / "report.json").string());
  return 0;
}

int cmd_sweep(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const auto weights = o.weights.empty() ? experiment::default_grid() : o.weights;
  const auto rows = experiment::sweep(cfg, weights);
  const fs::path out = cfg.output_dir / "sweep.csv";
  io::write_file_atomic(out, experiment::sweep_csv(rows));
  fmt::print("{} rows ({} weights x {} seeds)\nwrote {}\n", rows.size(), weights.size(), cfg.seeds.size(),
             out.string());
  return 0;
}

std::string summary(std::size_t n, std::size_t open) {
  if (open > 0) return fmt::format("dependent ({} of {} path{} open)", open, n, n == 1 ? "" : "s");
  if (n == 0) return "independent (no connecting paths)";
  if (n == 1) return "independent (1 path, blocked)";
  if (n == 2) return "independent (2 paths, both blocked)";
  return fmt::format("independent ({} paths, all blocked)", n);
}

void print_theorem1(const causal::Theorem1Verdict& v) {
  fmt::print("{}:\n", v.confounded ? "confounded" : "unconfounded");
  fmt::print("  X_a _||_ E      : {}\n", v.xa_indep_e ? "independent" : "dependent");
  for (const auto& p : v.marginal_paths) fmt::print("    {}\n", causal::format_path(causal::build_ad_graph(v.confounded), p));
  fmt::print("  X_a _||_ E | W  : {}\n", v.xa_indep_e_given_w ? "independent" : "dependent");
  for (const auto& p : v.conditional_paths)
    fmt::print("    {}\n", causal::format_path(causal::build_ad_graph(v.confounded), p));
  fmt::print("  path oracle agrees: {}\n  {}\n", v.oracle_agrees ? "yes" : "no", v.passed ? "PASS" : "FAIL");
}

int cmd_dsep(const Options& o) {
  if (o.theorem1) {
    bool ok = true;
    for (bool confounded : {false, true}) {
      const auto v = causal::verify_theorem1(confounded);
      print_theorem1(v);
      ok = ok && v.passed;
    }
    if (o.query.empty()) return ok ? 0 : 2;
  }
  if (o.query.empty()) throw ConfigError("dsep: --query is required unless --theorem1 is given");
  if (o.builtin.empty() == o.graph.empty()) throw ConfigError("dsep: give exactly one of --builtin or a graph file");
  causal::CausalGraph g = [&] {
    if (o.graph.empty()) {
      if (o.builtin != "confounded" && o.builtin != "unconfounded")
        throw ConfigError("dsep: --builtin must be confounded or unconfounded");
      return causal::build_ad_graph(o.builtin == "confounded");
    }
    return causal::load_graph(o.graph);
  }();
  const causal::IndependenceQuery q = causal::parse_query(g, o.query);
  std::size_t n = 0, open = 0;
  for (int a : q.sources)
    for (int b : q.targets)
      for (const auto& p : causal::enumerate_paths(g, a, b)) {
        const auto v = causal::explain_path(g, p, q.observed);
        fmt::print("{}\n", causal::format_path(g, v));
        ++n;
        open += v.blocked ? 0 : 1;
      }
  const bool indep = causal::d_separated(g, q);
  if (indep != (open == 0)) throw NumericError("dsep: reachability and path enumeration disagree");
  fmt::print("{}\n", summary(n, open));
  return 0;
}

int cmd_plot(const Options& o) {
  if (o.inputs.empty()) throw ConfigError("plot: no input files");
  const fs::path out = o.out.empty() ? fs::path("figures") : fs::path(o.out);
  std::vector<std::pair<std::string, eval::EvalReport>> reports;
  std::vector<std::pair<fs::path, std::string>> figures;
  for (const auto& in : o.inputs) {
    const fs::path p(in);
    const std::string text = io::read_file(p);
    const std::string label = p.has_parent_path() && p.parent_path().filename() != "" ? p.parent_path().filename().string()
                                                                                     : p.stem().string();
    if (p.extension() == ".json") {
      eval::EvalReport r = io::parse_report(text);
      if (r.per_env.empty()) throw ConfigError("plot: report " + in + " has no environments");
      reports.emplace_back(label, std::move(r));
    } else if (text.rfind("lambda,", 0) == 0) {
      figures.emplace_back(out / ("ablation_" + p.stem().string() + ".svg"),
                           plot::ablation_svg(experiment::parse_sweep_csv(text)));
    } else if (text.rfind("z0,", 0) == 0) {
      figures.emplace_back(out / ("scatter_" + p.stem().string() + ".svg"),
                           plot::pca_scatter_svg(io::parse_reps_csv(text)));
    } else {
      throw ConfigError("plot: cannot tell what kind of file " + in + " is");
    }
  }
  if (!reports.empty()) figures.emplace_back(out / "auroc_bars.svg", plot::auroc_bars_svg(reports));
  // Every figure is built before anything is written.
  for (const auto& [path, svg] : figures) {
    io::write_file_atomic(path, svg);
    fmt::print("wrote {}\n", path.string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial conditional invariant regularization toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "Write train/held-out/test datasets for every seed");
  auto* run = app.add_subcommand("run", "Train, score and evaluate every seed; write the report");
  auto* sweep = app.add_subcommand("sweep", "Run a grid of regularization weights; write sweep.csv");
  for (auto* sc : {gen, run, sweep}) {
    sc->add_option("--config", o.config, "YAML experiment config (built-in default scenario if omitted)");
    sc->add_option("--out", o.out, "Output directory (overrides output.dir)");
    sc->add_option("--seeds", o.seeds, "Comma-separated seeds (override eval.seeds)")->delimiter(',');
  }
  sweep->add_option("--weights", o.weights, "Comma-separated regularization weights")->delimiter(',');

  auto* dsep = app.add_subcommand("dsep", "d-separation queries on a causal graph");
  dsep->add_option("graph", o.graph, "Graph description file");
  dsep->add_option("--builtin", o.builtin, "Built-in graph: confounded or unconfounded");
  dsep->add_option("--query", o.query, "Query such as \"Xa _||_ E | W\"");
  dsep->add_flag("--theorem1", o.theorem1, "Check the independence theorem on both built-in graphs");

  auto* plot = app.add_subcommand("plot", "Render SVG figures from reports, sweeps and representation files");
  plot->add_option("inputs", o.inputs, "report.json, sweep.csv or reps_*.csv files")->required();
  plot->add_option("--out", o.out, "Output directory for the SVG files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (run->parsed()) return cmd_run(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (dsep->parsed()) return cmd_dsep(o);
    if (plot->parsed()) return cmd_plot(o);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 1;
}
