#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcir/tensor.hpp"

namespace pcir::eval {

/// Probability that an anomaly outscores a normal sample, ties counted as
/// one half. Sort-based, O(n log n).
double auroc(std::span<const double> normal_scores, std::span<const double> anomaly_scores);

/// Projection of the rows onto their first principal component (the column
/// itself for 1-D data). The component's sign is fixed so that its largest
/// entry is positive.
Vector first_principal_projection(const Matrix& x);

/// Plug-in mutual information (nats) between the first principal
/// projections of X and Z, using a bins x bins equal-width histogram over
/// each sample range. Clamped at 0.
double binned_mi(const Matrix& x, const Matrix& z, int bins = 16);

/// Plug-in entropy (nats) of the binned first principal projection.
double binned_entropy(const Matrix& x, int bins = 16);

/// Max over environment pairs of the unbiased MMD^2 (median-heuristic
/// bandwidth) between representation sets.
double invariance_gap(const std::vector<Matrix>& reps_by_env);

/// Quantile of the invariance gap under random relabelling of the pooled
/// representations (environment sizes preserved).
double permutation_gap_quantile(const std::vector<Matrix>& reps_by_env, int permutations, double quantile,
                                std::uint64_t seed);

struct EnvAuroc {
  std::string env;
  double auroc = 0.0;
};

/// Metrics of one trained model (one seed).
struct SeedRun {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::string config_digest;
  std::vector<EnvAuroc> envs;
  double invariance_gap = 0.0;
  double mi_nats = 0.0;
};

struct EnvSummary {
  std::string env;
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  std::vector<double> auroc_per_seed;
};

struct EvalReport {
  std::string config_digest;
  std::vector<std::uint64_t> seeds;
  std::vector<EnvSummary> per_env;
  double invariance_gap = 0.0;
  double invariance_gap_std = 0.0;
  double mi_nats = 0.0;
  double mi_nats_std = 0.0;
  double lambda = 0.0;

  const EnvSummary& env(const std::string& name) const;
};

/// Mean and sample standard deviation (0 for a single run) across seeds.
/// Runs must share config digest, lambda and environment list.
EvalReport build_report(const std::vector<SeedRun>& runs);

}  // namespace pcir::eval
