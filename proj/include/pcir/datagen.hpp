#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcir/tensor.hpp"

namespace pcir::data {

enum class Mixing { None, Orthogonal };

/// Generative model for the anomaly-detection graph:
///   W -> X_a, W -> X_e (shortcut, strength `shortcut`), E -> X_e,
///   U -> {W, E} with strength `confounding`.
/// Features are M (X_a ++ X_e) with M the identity or a seeded rotation.
struct ScmConfig {
  int d_a = 2;
  int d_e = 4;
  Vector mu_normal;
  Vector mu_anomaly;
  double sigma_a = 1.0;
  /// Style mean of each training environment; environment ids are indices.
  std::vector<Vector> env_style_means;
  double sigma_e = 1.0;
  double shortcut = 0.0;
  double confounding = 0.0;
  Mixing mixing = Mixing::None;
  double shift = 3.0;
  std::uint64_t seed = 0;

  int dim() const { return d_a + d_e; }
  int num_envs() const { return static_cast<int>(env_style_means.size()); }
  void validate() const;
  /// Stable 64-bit hex digest of every field.
  std::string digest() const;
};

/// Two training environments, two content and four style dimensions, a
/// content gap of 3 between normal and anomalous means and a style shortcut
/// of 2. The second environment's style mean is 5 on every dimension
/// (shift + shortcut), so an anomaly in the fully shifted test environment
/// carries exactly the style of a normal training environment.
ScmConfig default_scenario();

enum class EnvKind {
  /// E drawn from the confounded mechanism over the training environments.
  Observational,
  /// do(E = e): style mean fixed to `style_mean`, U -> E severed.
  Domain,
  /// do(X_e = x): style features clamped to `clamp`.
  Covariate,
};

struct EnvSpec {
  std::string name;
  int env_id = 0;
  EnvKind kind = EnvKind::Domain;
  Vector style_mean;
  Vector clamp;

  /// Human-readable intervention record for metadata.
  std::string record() const;
};

/// Column-oriented sample set. `features` are mixed; `unmixed` keeps
/// X_a ++ X_e before the rotation. `latent_u` holds the confounder draw per
/// row and is not serialized.
struct Dataset {
  Matrix features;
  Matrix unmixed;
  std::vector<int> env;
  std::vector<int> label;
  std::vector<double> latent_u;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string intervention;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  /// Row indices belonging to environment `e`, in order.
  std::vector<Index> rows_of_env(int e) const;
  std::vector<int> env_ids() const;
  Dataset subset(const std::vector<Index>& rows) const;
};

Matrix mixing_matrix(const ScmConfig& cfg);

Dataset sample_train(const ScmConfig& cfg, Index n_per_env, std::uint64_t seed);
Dataset sample_test(const ScmConfig& cfg, Index n_per_class, const EnvSpec& spec, std::uint64_t seed);

EnvSpec observational();
/// do(E = e) for a declared training environment.
EnvSpec intervene_domain(const ScmConfig& cfg, int env);
/// do(E = e) for a fresh environment with its own style mean.
EnvSpec intervene_domain(const ScmConfig& cfg, const Vector& style_mean, int env_id, std::string name);
EnvSpec intervene_covariate(const ScmConfig& cfg, const Vector& style);
/// Held-out domain: first training style mean shifted by `shift` on every
/// style dimension.
EnvSpec domain_shift_env(const ScmConfig& cfg);

/// e_0 is training environment 0; e_i additionally shifts style dimension i
/// by `shift`, so e_i moves dimensions 1..i. Requires d_e >= 4.
std::vector<EnvSpec> covariate_shift_suite(const ScmConfig& cfg);
EnvSpec covariate_shift_env(const ScmConfig& cfg, int i);

}  // namespace pcir::data
