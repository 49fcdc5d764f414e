#include "pcir/config.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "pcir/io.hpp"
#include "pcir/rng.hpp"

namespace pcir {

void ExperimentConfig::validate() const {
  scm.validate();
  encoder.validate();
  train.validate();
  if (train_per_env < 2) throw ConfigError("data.train_per_env must be >= 2");
  if (test_per_class < 1) throw ConfigError("data.test_per_class must be >= 1");
  if (holdout_per_env < 2) throw ConfigError("data.holdout_per_env must be >= 2");
  if (k < 1) throw ConfigError("scorer.k must be >= 1");
  if (scorer == scoring::ScorerKind::Knn && k > train_per_env * scm.num_envs())
    throw ConfigError("scorer.k exceeds the number of training samples");
  if (scorer == scoring::ScorerKind::Reconstruction && train.objective != model::Objective::Autoencoder)
    throw ConfigError("scorer.kind reconstruction needs model.objective autoencoder");
  if (seeds.empty()) throw ConfigError("eval.seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("eval.seeds must not repeat");
  if (mi_bins < 2) throw ConfigError("eval.mi_bins must be >= 2");
  if (gap_per_env < 2) throw ConfigError("eval.gap_per_env must be >= 2");
  if (shift_suite && scm.d_e < 4) throw ConfigError("eval.shift_suite needs scm.d_e >= 4");
  if (!shift_suite && !domain_shift && scm.num_envs() < 1) throw ConfigError("no test environments selected");
}

std::string ExperimentConfig::digest() const {
  ExperimentConfig c = *this;
  c.seeds.clear();
  c.output_dir.clear();
  return fmt::format("{:016x}", fnv1a(config_yaml(c)));
}

ExperimentConfig default_experiment() { return ExperimentConfig{}; }

ExperimentConfig default_autoencoder_experiment() {
  ExperimentConfig c;
  c.train.objective = model::Objective::Autoencoder;
  c.scorer = scoring::ScorerKind::Reconstruction;
  return c;
}

namespace {

template <typename E>
struct Choice {
  const char* name;
  E value;
};

const Choice<data::Mixing> kMixing[] = {{"none", data::Mixing::None}, {"orthogonal", data::Mixing::Orthogonal}};
const Choice<model::Objective> kObjective[] = {{"compactness", model::Objective::Compactness},
                                               {"autoencoder", model::Objective::Autoencoder}};
const Choice<model::Activation> kActivation[] = {{"tanh", model::Activation::Tanh}, {"relu", model::Activation::Relu}};
const Choice<OptimizerKind> kOptimizer[] = {{"adam", OptimizerKind::Adam}, {"sgd", OptimizerKind::Sgd}};
const Choice<BandwidthMode> kBandwidth[] = {{"median", BandwidthMode::MedianHeuristic},
                                            {"fixed", BandwidthMode::Fixed}};
const Choice<scoring::ScorerKind> kScorer[] = {{"knn", scoring::ScorerKind::Knn},
                                               {"reconstruction", scoring::ScorerKind::Reconstruction},
                                               {"cosine-norm", scoring::ScorerKind::CosineNorm}};

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& key, const std::string& msg) const {
    const YAML::Mark m = n.Mark();
    if (m.line >= 0) throw ConfigError(fmt::format("{}:{}: {}: {}", source_, m.line + 1, key, msg));
    throw ConfigError(fmt::format("{}: {}: {}", source_, key, msg));
  }

  // Requires a map and rejects keys outside `allowed`.
  void keys(const YAML::Node& map, const std::string& prefix, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, prefix, "expected a mapping");
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(kv.first, join(prefix, k), "unknown key");
    }
  }

  template <typename T>
  void get(const YAML::Node& parent, const std::string& prefix, const char* key, T& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    out = scalar<T>(n, join(prefix, key));
  }

  template <typename T>
  T scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a single value");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, key, std::string("cannot read '") + n.Scalar() + "' as " + type_name<T>());
    }
  }

  template <typename T>
  void list(const YAML::Node& parent, const std::string& prefix, const char* key, std::vector<T>& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string k = join(prefix, key);
    if (!n.IsSequence()) fail(n, k, "expected a list");
    out.clear();
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar<T>(n[i], fmt::format("{}[{}]", k, i)));
  }

  void vec(const YAML::Node& parent, const std::string& prefix, const char* key, Vector& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    std::vector<double> v;
    list(parent, prefix, key, v);
    out = Vector::Map(v.data(), static_cast<Index>(v.size()));
  }

  template <typename E, std::size_t N>
  void choice(const YAML::Node& parent, const std::string& prefix, const char* key, const Choice<E> (&options)[N],
              E& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string k = join(prefix, key);
    const auto s = scalar<std::string>(n, k);
    std::string allowed;
    for (const auto& o : options) {
      if (s == o.name) {
        out = o.value;
        return;
      }
      allowed += allowed.empty() ? o.name : std::string(", ") + o.name;
    }
    fail(n, k, "'" + s + "' is not one of " + allowed);
  }

  static std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else return "text";
  }

  std::string source_;
};

template <typename E, std::size_t N>
const char* name_of(const Choice<E> (&options)[N], E v) {
  for (const auto& o : options)
    if (o.value == v) return o.name;
  return "?";
}

std::string yaml_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + io::format_double(v[i]);
  return s + "]";
}

std::string yaml_list(const Vector& v) { return yaml_list(std::vector<double>(v.data(), v.data() + v.size())); }

template <typename T>
std::string yaml_int_list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}: YAML syntax error: {}", source, e.mark.line + 1, e.msg));
  }
  const Reader r(source);
  ExperimentConfig c;
  if (!root || root.IsNull()) {
    c.validate();
    return c;
  }
  r.keys(root, "", {"scm", "data", "model", "scorer", "eval", "output"});

  if (const YAML::Node s = root["scm"]) {
    r.keys(s, "scm",
           {"d_a", "d_e", "mu_normal", "mu_anomaly", "sigma_a", "env_style_means", "sigma_e", "shortcut",
            "confounding", "mixing", "shift", "seed"});
    auto& m = c.scm;
    const int old_a = m.d_a, old_e = m.d_e;
    r.get(s, "scm", "d_a", m.d_a);
    r.get(s, "scm", "d_e", m.d_e);
    // Dimension changes without explicit means resize the defaults.
    if (m.d_a != old_a && m.d_a > 0) {
      const double gap = 3.0 / std::sqrt(static_cast<double>(m.d_a));
      m.mu_normal = Vector::Zero(m.d_a);
      m.mu_anomaly = Vector::Constant(m.d_a, gap);
    }
    if (m.d_e != old_e && m.d_e > 0)
      for (auto& v : m.env_style_means) v = Vector::Constant(m.d_e, v.size() ? v(0) : 0.0);
    r.vec(s, "scm", "mu_normal", m.mu_normal);
    r.vec(s, "scm", "mu_anomaly", m.mu_anomaly);
    r.get(s, "scm", "sigma_a", m.sigma_a);
    if (const YAML::Node ev = s["env_style_means"]) {
      if (!ev.IsSequence()) r.fail(ev, "scm.env_style_means", "expected a list of lists");
      m.env_style_means.clear();
      for (std::size_t i = 0; i < ev.size(); ++i) {
        const std::string k = fmt::format("scm.env_style_means[{}]", i);
        if (!ev[i].IsSequence()) r.fail(ev[i], k, "expected a list");
        Vector v(static_cast<Index>(ev[i].size()));
        for (std::size_t j = 0; j < ev[i].size(); ++j)
          v(static_cast<Index>(j)) = r.scalar<double>(ev[i][j], fmt::format("{}[{}]", k, j));
        m.env_style_means.push_back(std::move(v));
      }
    }
    r.get(s, "scm", "sigma_e", m.sigma_e);
    r.get(s, "scm", "shortcut", m.shortcut);
    r.get(s, "scm", "confounding", m.confounding);
    r.choice(s, "scm", "mixing", kMixing, m.mixing);
    r.get(s, "scm", "shift", m.shift);
    r.get(s, "scm", "seed", m.seed);
  }

  if (const YAML::Node d = root["data"]) {
    r.keys(d, "data", {"train_per_env", "test_per_class", "holdout_per_env"});
    r.get(d, "data", "train_per_env", c.train_per_env);
    r.get(d, "data", "test_per_class", c.test_per_class);
    r.get(d, "data", "holdout_per_env", c.holdout_per_env);
  }

  if (const YAML::Node m = root["model"]) {
    r.keys(m, "model",
           {"objective", "hidden", "rep_dim", "activation", "lambda", "epochs", "batch_per_env", "optimizer",
            "learning_rate", "kernel", "regularize"});
    r.choice(m, "model", "objective", kObjective, c.train.objective);
    // Choosing the autoencoder family switches to its defaults; later keys
    // still override them.
    if (c.train.objective == model::Objective::Autoencoder) {
      const ExperimentConfig a = default_autoencoder_experiment();
      c.encoder = a.encoder;
      c.train = a.train;
      c.scorer = a.scorer;
    }
    r.list(m, "model", "hidden", c.encoder.hidden);
    r.get(m, "model", "rep_dim", c.encoder.rep_dim);
    r.choice(m, "model", "activation", kActivation, c.encoder.activation);
    r.get(m, "model", "lambda", c.train.lambda);
    r.get(m, "model", "epochs", c.train.epochs);
    r.get(m, "model", "batch_per_env", c.train.batch_per_env);
    r.choice(m, "model", "optimizer", kOptimizer, c.train.optimizer);
    r.get(m, "model", "learning_rate", c.train.learning_rate);
    r.get(m, "model", "regularize", c.train.regularize);
    if (const YAML::Node k = m["kernel"]) {
      r.keys(k, "model.kernel", {"mode", "bandwidths", "multipliers", "weights"});
      auto& kc = c.train.kernel;
      r.choice(k, "model.kernel", "mode", kBandwidth, kc.mode);
      r.list(k, "model.kernel", "bandwidths", kc.bandwidths);
      r.list(k, "model.kernel", "multipliers", kc.multipliers);
      r.list(k, "model.kernel", "weights", kc.weights);
    }
  }

  if (const YAML::Node s = root["scorer"]) {
    r.keys(s, "scorer", {"kind", "k"});
    r.choice(s, "scorer", "kind", kScorer, c.scorer);
    r.get(s, "scorer", "k", c.k);
  }

  if (const YAML::Node e = root["eval"]) {
    r.keys(e, "eval", {"shift_suite", "domain_shift", "seeds", "mi_bins", "gap_per_env"});
    r.get(e, "eval", "shift_suite", c.shift_suite);
    r.get(e, "eval", "domain_shift", c.domain_shift);
    r.list(e, "eval", "seeds", c.seeds);
    r.get(e, "eval", "mi_bins", c.mi_bins);
    r.get(e, "eval", "gap_per_env", c.gap_per_env);
  }

  if (const YAML::Node o = root["output"]) {
    r.keys(o, "output", {"dir"});
    std::string dir = c.output_dir.string();
    r.get(o, "output", "dir", dir);
    c.output_dir = dir;
  }

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.string());
}

std::string config_yaml(const ExperimentConfig& c) {
  const auto& m = c.scm;
  std::string s = "scm:\n";
  s += fmt::format("  d_a: {}\n  d_e: {}\n", m.d_a, m.d_e);
  s += "  mu_normal: " + yaml_list(m.mu_normal) + "\n";
  s += "  mu_anomaly: " + yaml_list(m.mu_anomaly) + "\n";
  s += "  sigma_a: " + io::format_double(m.sigma_a) + "\n";
  s += "  env_style_means:\n";
  for (const auto& v : m.env_style_means) s += "    - " + yaml_list(v) + "\n";
  s += "  sigma_e: " + io::format_double(m.sigma_e) + "\n";
  s += "  shortcut: " + io::format_double(m.shortcut) + "\n";
  s += "  confounding: " + io::format_double(m.confounding) + "\n";
  s += fmt::format("  mixing: {}\n", name_of(kMixing, m.mixing));
  s += "  shift: " + io::format_double(m.shift) + "\n";
  s += fmt::format("  seed: {}\n", m.seed);

  s += fmt::format("data:\n  train_per_env: {}\n  test_per_class: {}\n  holdout_per_env: {}\n", c.train_per_env,
                   c.test_per_class, c.holdout_per_env);

  const auto& t = c.train;
  s += "model:\n";
  s += fmt::format("  objective: {}\n", name_of(kObjective, t.objective));
  s += "  hidden: " + yaml_int_list(c.encoder.hidden) + "\n";
  s += fmt::format("  rep_dim: {}\n", c.encoder.rep_dim);
  s += fmt::format("  activation: {}\n", name_of(kActivation, c.encoder.activation));
  s += "  lambda: " + io::format_double(t.lambda) + "\n";
  s += fmt::format("  epochs: {}\n  batch_per_env: {}\n", t.epochs, t.batch_per_env);
  s += fmt::format("  optimizer: {}\n", name_of(kOptimizer, t.optimizer));
  s += "  learning_rate: " + io::format_double(t.learning_rate) + "\n";
  s += fmt::format("  regularize: {}\n", t.regularize ? "true" : "false");
  s += "  kernel:\n";
  s += fmt::format("    mode: {}\n", name_of(kBandwidth, t.kernel.mode));
  s += "    bandwidths: " + yaml_list(t.kernel.bandwidths) + "\n";
  s += "    multipliers: " + yaml_list(t.kernel.multipliers) + "\n";
  s += "    weights: " + yaml_list(t.kernel.weights) + "\n";

  s += fmt::format("scorer:\n  kind: {}\n  k: {}\n", name_of(kScorer, c.scorer), c.k);
  s += fmt::format("eval:\n  shift_suite: {}\n  domain_shift: {}\n", c.shift_suite ? "true" : "false",
                   c.domain_shift ? "true" : "false");
  s += "  seeds: " + yaml_int_list(c.seeds) + "\n";
  s += fmt::format("  mi_bins: {}\n  gap_per_env: {}\n", c.mi_bins, c.gap_per_env);
  s += "output:\n  dir: " + YAML::Dump(YAML::Node(c.output_dir.string())) + "\n";
  return s;
}

}  // namespace pcir
