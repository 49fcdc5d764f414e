#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pcir/autodiff.hpp"
#include "pcir/tensor.hpp"

namespace pcir {

enum class BandwidthMode { Fixed, MedianHeuristic };

/// Gaussian kernel family. In fixed mode `bandwidths` are the sigma values;
/// in median-heuristic mode each multiplier scales the pooled median distance.
/// Kernels are combined with `weights` (uniform 1/K when empty).
struct KernelConfig {
  BandwidthMode mode = BandwidthMode::MedianHeuristic;
  std::vector<double> bandwidths;
  std::vector<double> multipliers{1.0};
  std::vector<double> weights;

  void validate() const;
  std::size_t size() const { return mode == BandwidthMode::Fixed ? bandwidths.size() : multipliers.size(); }
  double weight(std::size_t i) const {
    return weights.empty() ? 1.0 / static_cast<double>(size()) : weights[i];
  }

  static KernelConfig fixed(std::vector<double> sigmas) {
    KernelConfig k;
    k.mode = BandwidthMode::Fixed;
    k.bandwidths = std::move(sigmas);
    return k;
  }
  static KernelConfig median(std::vector<double> multipliers = {1.0}) {
    KernelConfig k;
    k.multipliers = std::move(multipliers);
    return k;
  }
  /// {0.5, 1, 2} x median, uniform weights.
  static KernelConfig multi_median() { return median({0.5, 1.0, 2.0}); }
};

/// Representations of the normal samples of one environment.
struct EnvBatch {
  int env = 0;
  Matrix reps;
  int label = 0;
};

template <typename DerivedX, typename DerivedY>
double rbf_kernel(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                  double sigma) {
  if (x.size() != y.size()) throw ConfigError("rbf_kernel: dimension mismatch");
  if (!(sigma > 0.0)) throw ConfigError("rbf_kernel: bandwidth must be positive");
  const double d2 = (x.derived().reshaped() - y.derived().reshaped()).squaredNorm();
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

/// Squared Euclidean distances between rows of A and rows of B.
template <typename DerivedA, typename DerivedB>
Matrix pairwise_sq_dists(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B) {
  if (A.cols() != B.cols()) throw ConfigError("dimension mismatch: " + shape_str(A) + " vs " + shape_str(B));
  Matrix d(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < B.rows(); ++j) d(i, j) = (A.row(i) - B.row(j)).squaredNorm();
  return d;
}

/// Median Euclidean distance over unordered pairs of distinct points of A u B.
/// A zero median falls back to the smallest nonzero distance; if every point
/// coincides the result is 1.
template <typename DerivedA, typename DerivedB>
double median_heuristic(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B) {
  if (A.size() > 0 && B.size() > 0 && A.cols() != B.cols())
    throw ConfigError("median_heuristic: dimension mismatch");
  const Index n = A.rows() + B.rows();
  if (n < 2) throw ConfigError("median_heuristic: need at least 2 points");
  const Index d = A.rows() > 0 ? A.cols() : B.cols();
  Matrix pooled(n, d);
  if (A.rows() > 0) pooled.topRows(A.rows()) = A;
  if (B.rows() > 0) pooled.bottomRows(B.rows()) = B;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) dist.push_back((pooled.row(i) - pooled.row(j)).norm());
  std::sort(dist.begin(), dist.end());
  const std::size_t m = dist.size();
  const double med = m % 2 == 1 ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
  if (med > 0.0) return med;
  const auto nz = std::upper_bound(dist.begin(), dist.end(), 0.0);
  return nz == dist.end() ? 1.0 : *nz;
}

template <typename DerivedA, typename DerivedB>
std::vector<double> resolve_bandwidths(const KernelConfig& cfg, const Eigen::MatrixBase<DerivedA>& A,
                                       const Eigen::MatrixBase<DerivedB>& B) {
  cfg.validate();
  if (cfg.mode == BandwidthMode::Fixed) return cfg.bandwidths;
  const double med = median_heuristic(A, B);
  std::vector<double> out;
  for (double m : cfg.multipliers) out.push_back(m * med);
  return out;
}

namespace detail {

template <typename DerivedA, typename DerivedB>
void check_sets(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B, Index min_rows,
                const char* who) {
  if (A.rows() < min_rows || B.rows() < min_rows)
    throw ConfigError(std::string(who) + ": each sample set needs at least " + std::to_string(min_rows) +
                      " rows");
  if (A.cols() != B.cols()) throw ConfigError(std::string(who) + ": dimension mismatch");
}

inline Matrix gaussian(const Matrix& sq, double sigma) {
  return (-sq.array() / (2.0 * sigma * sigma)).exp().matrix();
}

}  // namespace detail

/// V-statistic estimate of squared MMD; nonnegative, defined for singletons.
template <typename DerivedA, typename DerivedB>
double mmd2_biased(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
                   const KernelConfig& cfg) {
  detail::check_sets(A, B, 1, "mmd2_biased");
  const std::vector<double> sigmas = resolve_bandwidths(cfg, A, B);
  const Matrix daa = pairwise_sq_dists(A, A), dbb = pairwise_sq_dists(B, B), dab = pairwise_sq_dists(A, B);
  double total = 0.0;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const double s = sigmas[k];
    const double v = detail::gaussian(daa, s).mean() + detail::gaussian(dbb, s).mean() -
                     2.0 * detail::gaussian(dab, s).mean();
    total += cfg.weight(k) * v;
  }
  return std::max(total, 0.0);
}

/// U-statistic estimate of squared MMD; unbiased and may be negative.
template <typename DerivedA, typename DerivedB>
double mmd2_unbiased(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
                     const KernelConfig& cfg) {
  detail::check_sets(A, B, 2, "mmd2_unbiased");
  const std::vector<double> sigmas = resolve_bandwidths(cfg, A, B);
  const double m = static_cast<double>(A.rows()), n = static_cast<double>(B.rows());
  const Matrix daa = pairwise_sq_dists(A, A), dbb = pairwise_sq_dists(B, B), dab = pairwise_sq_dists(A, B);
  double total = 0.0;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const double s = sigmas[k];
    const Matrix kaa = detail::gaussian(daa, s), kbb = detail::gaussian(dbb, s);
    const double within_a = (kaa.sum() - kaa.trace()) / (m * (m - 1.0));
    const double within_b = (kbb.sum() - kbb.trace()) / (n * (n - 1.0));
    total += cfg.weight(k) * (within_a + within_b - 2.0 * detail::gaussian(dab, s).mean());
  }
  return total;
}

/// Sum of biased MMD^2 over unordered environment pairs (i < j, in input
/// order). Eq.-style ordered-pair sums are twice this; the factor is left to
/// the regularization weight.
double pcir(const std::vector<EnvBatch>& batches, const KernelConfig& cfg);

namespace ad {

/// Differentiable biased MMD^2 with the bandwidths held constant.
Var mmd2_biased(Var A, Var B, const std::vector<double>& sigmas, const std::vector<double>& weights = {});

/// Differentiable biased MMD^2; bandwidths resolved from the current values
/// and excluded from the gradient.
Var mmd2_biased(Var A, Var B, const KernelConfig& cfg);

struct EnvReps {
  int env = 0;
  Var reps;
  int label = 0;
};

/// Differentiable PCIR over per-environment representation batches. With a
/// single environment the result is a constant zero.
Var pcir(const std::vector<EnvReps>& batches, const KernelConfig& cfg);

}  // namespace ad

}  // namespace pcir
