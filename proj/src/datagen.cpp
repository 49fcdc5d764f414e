#include "pcir/datagen.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>
#include <fmt/format.h>

#include "pcir/rng.hpp"

namespace pcir::data {

namespace {

constexpr std::uint64_t kMixingStream = 0x6d6978;
constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kTestStream = 0x74657374;
// Logit scale of the confounded environment choice at confounding = 1.
constexpr double kConfoundingGain = 4.0;

void append_vec(std::string& s, const Vector& v) {
  s += "[";
  for (Index i = 0; i < v.size(); ++i) s += fmt::format("{}{:.17g}", i ? "," : "", v(i));
  s += "]";
}

// Draws U ~ N(0,1) conditioned on W = 1{U + noise > 0} taking `label`.
double draw_u_given_w(Rng& rng, int label) {
  for (;;) {
    const double u = rng.normal();
    const double noise = rng.normal();
    if (static_cast<int>(u + noise > 0.0) == label) return u;
  }
}

int draw_env_given_u(Rng& rng, const ScmConfig& cfg, double u) {
  const int k = cfg.num_envs();
  if (k == 1) return 0;
  std::vector<double> logits(static_cast<std::size_t>(k));
  double top = -1e300;
  for (int e = 0; e < k; ++e) {
    const double c = -1.0 + 2.0 * e / (k - 1.0);
    logits[static_cast<std::size_t>(e)] = kConfoundingGain * cfg.confounding * u * c;
    top = std::max(top, logits[static_cast<std::size_t>(e)]);
  }
  double z = 0.0;
  for (auto& l : logits) z += (l = std::exp(l - top));
  double r = rng.uniform() * z;
  for (int e = 0; e < k; ++e) {
    r -= logits[static_cast<std::size_t>(e)];
    if (r < 0.0) return e;
  }
  return k - 1;
}

struct RowDraw {
  Vector x;
  double u;
};

RowDraw draw_row(Rng& rng, const ScmConfig& cfg, int label, const Vector* style_mean, const Vector* clamp,
                 double u) {
  Vector x(cfg.dim());
  const Vector& mu = label == 0 ? cfg.mu_normal : cfg.mu_anomaly;
  for (int j = 0; j < cfg.d_a; ++j) x(j) = mu(j) + cfg.sigma_a * rng.normal();
  for (int j = 0; j < cfg.d_e; ++j) {
    if (clamp) {
      x(cfg.d_a + j) = (*clamp)(j);
    } else {
      x(cfg.d_a + j) = (*style_mean)(j) + cfg.shortcut * label + cfg.sigma_e * rng.normal();
    }
  }
  return {x, u};
}

Dataset finish(const ScmConfig& cfg, Matrix unmixed, std::vector<int> env, std::vector<int> label,
               std::vector<double> u, std::uint64_t seed, std::string intervention) {
  Dataset ds;
  ds.features = cfg.mixing == Mixing::None ? unmixed : Matrix(unmixed * mixing_matrix(cfg).transpose());
  ds.unmixed = std::move(unmixed);
  ds.env = std::move(env);
  ds.label = std::move(label);
  ds.latent_u = std::move(u);
  ds.config_digest = cfg.digest();
  ds.seed = seed;
  ds.intervention = std::move(intervention);
  return ds;
}

}  // namespace

void ScmConfig::validate() const {
  if (d_a < 1 || d_e < 1) throw ConfigError("scm: dimensions must be >= 1");
  if (mu_normal.size() != d_a || mu_anomaly.size() != d_a)
    throw ConfigError("scm: content means must have d_a entries");
  if (mu_normal == mu_anomaly) throw ConfigError("scm: normal and anomaly content means must differ");
  if (!(sigma_a > 0.0) || !(sigma_e > 0.0)) throw ConfigError("scm: noise scales must be positive");
  if (env_style_means.empty()) throw ConfigError("scm: at least one training environment required");
  for (std::size_t i = 0; i < env_style_means.size(); ++i) {
    if (env_style_means[i].size() != d_e) throw ConfigError("scm: style means must have d_e entries");
    for (std::size_t j = 0; j < i; ++j)
      if (env_style_means[i] == env_style_means[j])
        throw ConfigError("scm: training environments need distinct style means");
  }
  if (!(shortcut >= 0.0)) throw ConfigError("scm: shortcut must be >= 0");
  if (!(confounding >= 0.0 && confounding <= 1.0)) throw ConfigError("scm: confounding must lie in [0, 1]");
  if (!std::isfinite(shift)) throw ConfigError("scm: shift must be finite");
}

std::string ScmConfig::digest() const {
  std::string s = fmt::format("d_a={};d_e={};mu0=", d_a, d_e);
  append_vec(s, mu_normal);
  s += ";mu1=";
  append_vec(s, mu_anomaly);
  s += fmt::format(";sa={:.17g};se={:.17g};nu=", sigma_a, sigma_e);
  for (const auto& v : env_style_means) append_vec(s, v);
  s += fmt::format(";beta={:.17g};rho={:.17g};mix={};delta={:.17g};seed={}", shortcut, confounding,
                   mixing == Mixing::None ? "none" : "orthogonal", shift, seed);
  return fmt::format("{:016x}", fnv1a(s));
}

ScmConfig default_scenario() {
  ScmConfig c;
  c.d_a = 2;
  c.d_e = 4;
  c.mu_normal = Vector::Zero(2);
  c.mu_anomaly = Vector::Constant(2, 3.0 / std::sqrt(2.0));
  c.env_style_means = {Vector::Zero(4), Vector::Constant(4, 5.0)};
  c.sigma_a = 1.0;
  c.sigma_e = 1.0;
  c.shortcut = 2.0;
  c.confounding = 0.0;
  c.shift = 3.0;
  c.seed = 0;
  return c;
}

std::string EnvSpec::record() const {
  std::string s;
  switch (kind) {
    case EnvKind::Observational: s = "observational"; break;
    case EnvKind::Domain:
      s = fmt::format("do(E={}) style_mean=", env_id);
      append_vec(s, style_mean);
      break;
    case EnvKind::Covariate:
      s = "do(X_e=";
      append_vec(s, clamp);
      s += ")";
      break;
  }
  return name.empty() ? s : name + ": " + s;
}

std::vector<Index> Dataset::rows_of_env(int e) const {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < env.size(); ++i)
    if (env[i] == e) rows.push_back(static_cast<Index>(i));
  return rows;
}

std::vector<int> Dataset::env_ids() const {
  std::vector<int> ids;
  for (int e : env)
    if (std::find(ids.begin(), ids.end(), e) == ids.end()) ids.push_back(e);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), dim());
  out.unmixed.resize(static_cast<Index>(rows.size()), unmixed.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    out.features.row(static_cast<Index>(i)) = features.row(r);
    out.unmixed.row(static_cast<Index>(i)) = unmixed.row(r);
    out.env.push_back(env[static_cast<std::size_t>(r)]);
    out.label.push_back(label[static_cast<std::size_t>(r)]);
    if (!latent_u.empty()) out.latent_u.push_back(latent_u[static_cast<std::size_t>(r)]);
  }
  out.config_digest = config_digest;
  out.seed = seed;
  out.intervention = intervention;
  return out;
}

Matrix mixing_matrix(const ScmConfig& cfg) {
  const Index d = cfg.dim();
  if (cfg.mixing == Mixing::None) return Matrix::Identity(d, d);
  Rng rng(derive_seed(cfg.seed, kMixingStream));
  const Eigen::MatrixXd g = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Dataset sample_train(const ScmConfig& cfg, Index n_per_env, std::uint64_t seed) {
  cfg.validate();
  if (n_per_env < 1) throw ConfigError("sample_train: n_per_env must be >= 1");
  const int k = cfg.num_envs();
  Matrix x(n_per_env * k, cfg.dim());
  std::vector<int> env, label;
  std::vector<double> u;
  for (int e = 0; e < k; ++e) {
    Rng rng(derive_seed(derive_seed(seed, kTrainStream), static_cast<std::uint64_t>(e)));
    for (Index i = 0; i < n_per_env; ++i) {
      const double ui = draw_u_given_w(rng, 0);
      const RowDraw r = draw_row(rng, cfg, 0, &cfg.env_style_means[static_cast<std::size_t>(e)], nullptr, ui);
      x.row(e * n_per_env + i) = r.x.transpose();
      env.push_back(e);
      label.push_back(0);
      u.push_back(r.u);
    }
  }
  return finish(cfg, std::move(x), std::move(env), std::move(label), std::move(u), seed, "train");
}

Dataset sample_test(const ScmConfig& cfg, Index n_per_class, const EnvSpec& spec, std::uint64_t seed) {
  cfg.validate();
  if (n_per_class < 1) throw ConfigError("sample_test: n_per_class must be >= 1");
  switch (spec.kind) {
    case EnvKind::Observational: break;
    case EnvKind::Domain:
      if (spec.style_mean.size() != cfg.d_e)
        throw ConfigError("sample_test: environment '" + spec.name + "' has no usable style mean");
      break;
    case EnvKind::Covariate:
      if (spec.clamp.size() != cfg.d_e) throw ConfigError("sample_test: clamp has wrong dimension");
      break;
  }
  Rng rng(derive_seed(derive_seed(seed, kTestStream), static_cast<std::uint64_t>(spec.env_id) + 0x1000));
  Matrix x(2 * n_per_class, cfg.dim());
  std::vector<int> env, label;
  std::vector<double> u;
  for (int w = 0; w <= 1; ++w) {
    for (Index i = 0; i < n_per_class; ++i) {
      const double ui = draw_u_given_w(rng, w);
      int e = spec.env_id;
      const Vector* mean = &spec.style_mean;
      if (spec.kind == EnvKind::Observational) {
        e = draw_env_given_u(rng, cfg, ui);
        mean = &cfg.env_style_means[static_cast<std::size_t>(e)];
      }
      const RowDraw r =
          draw_row(rng, cfg, w, mean, spec.kind == EnvKind::Covariate ? &spec.clamp : nullptr, ui);
      x.row(w * n_per_class + i) = r.x.transpose();
      env.push_back(e);
      label.push_back(w);
      u.push_back(ui);
    }
  }
  return finish(cfg, std::move(x), std::move(env), std::move(label), std::move(u), seed, spec.record());
}

EnvSpec observational() {
  EnvSpec s;
  s.name = "observational";
  s.env_id = -1;
  s.kind = EnvKind::Observational;
  return s;
}

EnvSpec intervene_domain(const ScmConfig& cfg, int env) {
  if (env < 0 || env >= cfg.num_envs())
    throw ConfigError("intervene_domain: environment " + std::to_string(env) + " is not declared");
  EnvSpec s;
  s.name = "train" + std::to_string(env);
  s.env_id = env;
  s.kind = EnvKind::Domain;
  s.style_mean = cfg.env_style_means[static_cast<std::size_t>(env)];
  return s;
}

EnvSpec intervene_domain(const ScmConfig& cfg, const Vector& style_mean, int env_id, std::string name) {
  if (style_mean.size() != cfg.d_e) throw ConfigError("intervene_domain: style mean has wrong dimension");
  EnvSpec s;
  s.name = std::move(name);
  s.env_id = env_id;
  s.kind = EnvKind::Domain;
  s.style_mean = style_mean;
  return s;
}

EnvSpec intervene_covariate(const ScmConfig& cfg, const Vector& style) {
  if (style.size() != cfg.d_e)
    throw ConfigError("intervene_covariate: expected " + std::to_string(cfg.d_e) + " style values, got " +
                      std::to_string(style.size()));
  EnvSpec s;
  s.name = "covariate";
  s.env_id = 300;
  s.kind = EnvKind::Covariate;
  s.clamp = style;
  return s;
}

EnvSpec domain_shift_env(const ScmConfig& cfg) {
  cfg.validate();
  return intervene_domain(cfg, cfg.env_style_means.front() + Vector::Constant(cfg.d_e, cfg.shift), 200, "domain");
}

EnvSpec covariate_shift_env(const ScmConfig& cfg, int i) {
  cfg.validate();
  if (cfg.d_e < 4) throw ConfigError("covariate shift suite needs d_e >= 4");
  if (i < 0 || i > 4) throw ConfigError("covariate shift environment e" + std::to_string(i) + " does not exist");
  Vector mean = cfg.env_style_means.front();
  for (int j = 0; j < i; ++j) mean(j) += cfg.shift;
  EnvSpec s = intervene_domain(cfg, mean, i == 0 ? 0 : 100 + i, "e" + std::to_string(i));
  return s;
}

std::vector<EnvSpec> covariate_shift_suite(const ScmConfig& cfg) {
  std::vector<EnvSpec> out;
  for (int i = 0; i <= 4; ++i) out.push_back(covariate_shift_env(cfg, i));
  return out;
}

}  // namespace pcir::data
