#include "pcir/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "pcir/mmd.hpp"
#include "pcir/rng.hpp"

namespace pcir::eval {

double auroc(std::span<const double> normal_scores, std::span<const double> anomaly_scores) {
  if (normal_scores.empty() || anomaly_scores.empty()) throw ConfigError("auroc: both score lists must be non-empty");
  std::vector<std::pair<double, bool>> all;
  all.reserve(normal_scores.size() + anomaly_scores.size());
  for (double s : normal_scores) all.emplace_back(s, false);
  for (double s : anomaly_scores) all.emplace_back(s, true);
  for (const auto& [s, a] : all)
    if (std::isnan(s)) throw NumericError("auroc: NaN score");
  std::sort(all.begin(), all.end(), [](const auto& l, const auto& r) { return l.first < r.first; });

  // Twice the Mann-Whitney U, accumulated over groups of tied scores.
  std::int64_t twice_u = 0, normals_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::int64_t tied_normals = 0, tied_anomalies = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tied_anomalies : tied_normals) += 1;
      ++j;
    }
    twice_u += tied_anomalies * (2 * normals_below + tied_normals);
    normals_below += tied_normals;
    i = j;
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(normal_scores.size()) * static_cast<double>(anomaly_scores.size()));
}

Vector first_principal_projection(const Matrix& x) {
  if (x.rows() == 0) throw ConfigError("first_principal_projection: no samples");
  if (x.cols() == 1) return x.col(0);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Vector axis = es.eigenvectors().col(x.cols() - 1);
  Index top = 0;
  axis.cwiseAbs().maxCoeff(&top);
  if (axis(top) < 0.0) axis = -axis;
  return centered * axis;
}

namespace {

std::vector<int> bin_values(const Vector& v, int bins) {
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  std::vector<int> out(static_cast<std::size_t>(v.size()), 0);
  if (!(hi > lo)) return out;
  const double width = (hi - lo) / bins;
  for (Index i = 0; i < v.size(); ++i)
    out[static_cast<std::size_t>(i)] = std::min(bins - 1, static_cast<int>((v(i) - lo) / width));
  return out;
}

}  // namespace

double binned_mi(const Matrix& x, const Matrix& z, int bins) {
  if (x.rows() != z.rows()) throw ConfigError("binned_mi: sample counts differ");
  if (bins < 2) throw ConfigError("binned_mi: need at least 2 bins");
  if (x.rows() == 0) throw ConfigError("binned_mi: no samples");
  const auto bx = bin_values(first_principal_projection(x), bins);
  const auto bz = bin_values(first_principal_projection(z), bins);
  const auto nb = static_cast<std::size_t>(bins);
  std::vector<double> joint(nb * nb, 0.0), px(nb, 0.0), pz(nb, 0.0);
  for (std::size_t i = 0; i < bx.size(); ++i) {
    const auto a = static_cast<std::size_t>(bx[i]), b = static_cast<std::size_t>(bz[i]);
    joint[a * nb + b] += 1.0;
    px[a] += 1.0;
    pz[b] += 1.0;
  }
  const double n = static_cast<double>(x.rows());
  double mi = 0.0;
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      const double c = joint[a * nb + b];
      if (c > 0.0) mi += (c / n) * std::log(c * n / (px[a] * pz[b]));
    }
  return std::max(mi, 0.0);
}

double binned_entropy(const Matrix& x, int bins) {
  if (bins < 2) throw ConfigError("binned_entropy: need at least 2 bins");
  const auto bx = bin_values(first_principal_projection(x), bins);
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (int b : bx) counts[static_cast<std::size_t>(b)] += 1.0;
  const double n = static_cast<double>(x.rows());
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h += (c / n) * std::log(c * n / (c * c));
  return h;
}

double invariance_gap(const std::vector<Matrix>& reps_by_env) {
  if (reps_by_env.size() < 2) throw ConfigError("invariance_gap: need at least 2 environments");
  const KernelConfig k = KernelConfig::median();
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < reps_by_env.size(); ++i)
    for (std::size_t j = i + 1; j < reps_by_env.size(); ++j)
      gap = std::max(gap, mmd2_unbiased(reps_by_env[i], reps_by_env[j], k));
  return gap;
}

double permutation_gap_quantile(const std::vector<Matrix>& reps_by_env, int permutations, double quantile,
                                std::uint64_t seed) {
  if (reps_by_env.size() < 2) throw ConfigError("permutation_gap_quantile: need at least 2 environments");
  if (permutations < 1 || !(quantile >= 0.0 && quantile <= 1.0))
    throw ConfigError("permutation_gap_quantile: bad permutation count or quantile");
  Index total = 0;
  for (const auto& r : reps_by_env) total += r.rows();
  Matrix pooled(total, reps_by_env.front().cols());
  Index at = 0;
  for (const auto& r : reps_by_env) {
    pooled.middleRows(at, r.rows()) = r;
    at += r.rows();
  }
  Rng rng(seed);
  std::vector<Index> idx(static_cast<std::size_t>(total));
  std::vector<double> gaps;
  for (int p = 0; p < permutations; ++p) {
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = total - 1; i > 0; --i)
      std::swap(idx[static_cast<std::size_t>(i)], idx[rng.below(static_cast<std::uint64_t>(i + 1))]);
    std::vector<Matrix> shuffled;
    Index pos = 0;
    for (const auto& r : reps_by_env) {
      Matrix m(r.rows(), r.cols());
      for (Index i = 0; i < r.rows(); ++i) m.row(i) = pooled.row(idx[static_cast<std::size_t>(pos++)]);
      shuffled.push_back(std::move(m));
    }
    gaps.push_back(invariance_gap(shuffled));
  }
  std::sort(gaps.begin(), gaps.end());
  const auto k = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(gaps.size())));
  return gaps[std::min(gaps.size() - 1, k == 0 ? 0 : k - 1)];
}

const EnvSummary& EvalReport::env(const std::string& name) const {
  for (const auto& e : per_env)
    if (e.env == name) return e;
  throw ConfigError("report has no environment '" + name + "'");
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

EvalReport build_report(const std::vector<SeedRun>& runs) {
  if (runs.empty()) throw ConfigError("build_report: no runs");
  const SeedRun& first = runs.front();
  for (const auto& r : runs) {
    if (r.config_digest != first.config_digest || r.lambda != first.lambda || r.envs.size() != first.envs.size())
      throw ConfigError("build_report: runs come from inconsistent configurations");
    for (std::size_t i = 0; i < r.envs.size(); ++i)
      if (r.envs[i].env != first.envs[i].env) throw ConfigError("build_report: environment lists differ");
  }
  EvalReport rep;
  rep.config_digest = first.config_digest;
  rep.lambda = first.lambda;
  std::vector<double> gaps, mis;
  for (const auto& r : runs) {
    rep.seeds.push_back(r.seed);
    gaps.push_back(r.invariance_gap);
    mis.push_back(r.mi_nats);
  }
  for (std::size_t i = 0; i < first.envs.size(); ++i) {
    EnvSummary s;
    s.env = first.envs[i].env;
    for (const auto& r : runs) s.auroc_per_seed.push_back(r.envs[i].auroc);
    std::tie(s.auroc_mean, s.auroc_std) = mean_std(s.auroc_per_seed);
    rep.per_env.push_back(std::move(s));
  }
  std::tie(rep.invariance_gap, rep.invariance_gap_std) = mean_std(gaps);
  std::tie(rep.mi_nats, rep.mi_nats_std) = mean_std(mis);
  return rep;
}

}  // namespace pcir::eval
