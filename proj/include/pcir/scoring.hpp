#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pcir/datagen.hpp"
#include "pcir/models.hpp"
#include "pcir/tensor.hpp"

namespace pcir::scoring {

// All scores follow one convention: higher means more anomalous.

enum class ScorerKind { Knn, Reconstruction, CosineNorm };

const char* to_string(ScorerKind k);

struct ScorerConfig {
  ScorerKind kind = ScorerKind::Knn;
  int k = 2;
  /// Reference representations (normal training data) for knn / cosine-norm.
  Matrix refs;

  void validate() const;
};

/// Mean Euclidean distance from z to its k nearest rows of refs.
template <typename DerivedR, typename DerivedZ>
double knn_score(const Eigen::MatrixBase<DerivedR>& refs, const Eigen::MatrixBase<DerivedZ>& z, int k) {
  if (k < 1 || k > refs.rows()) throw ConfigError("knn_score: k must lie in [1, |refs|]");
  if (z.size() != refs.cols()) throw ConfigError("knn_score: dimension mismatch");
  std::vector<double> d(static_cast<std::size_t>(refs.rows()));
  for (Index i = 0; i < refs.rows(); ++i)
    d[static_cast<std::size_t>(i)] = (refs.row(i) - z.derived().reshaped().transpose()).norm();
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += d[static_cast<std::size_t>(i)];
  return s / k;
}

/// |x - x_hat|^2.
template <typename DerivedX, typename DerivedY>
double reconstruction_score(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw ConfigError("reconstruction_score: shape mismatch");
  return (x - x_hat).squaredNorm();
}

/// Negated CSI normality score: -(max_m cos(ref_m, z)) * |z|. A zero z
/// scores 0; zero reference rows have zero similarity.
template <typename DerivedR, typename DerivedZ>
double cosine_norm_score(const Eigen::MatrixBase<DerivedR>& refs, const Eigen::MatrixBase<DerivedZ>& z) {
  if (refs.rows() == 0) throw ConfigError("cosine_norm_score: empty reference set");
  if (z.size() != refs.cols()) throw ConfigError("cosine_norm_score: dimension mismatch");
  const double zn = z.norm();
  if (zn == 0.0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < refs.rows(); ++i) {
    const double rn = refs.row(i).norm();
    const double cos = rn == 0.0 ? 0.0 : refs.row(i).dot(z.derived().reshaped().transpose()) / (rn * zn);
    best = std::max(best, cos);
  }
  return -best * zn;
}

struct Scores {
  std::vector<double> score;
  std::vector<int> label;
  std::vector<int> env;

  std::vector<double> of_label(int w) const;
};

/// Scores every row of `x` (features for reconstruction, representations
/// otherwise) in order.
std::vector<double> score_rows(const ScorerConfig& scorer, const Matrix& x, const Matrix& x_hat = {});

/// Encodes (and for reconstruction, decodes) the dataset, then scores it.
Scores score_dataset(const model::Detector& model, const ScorerConfig& scorer, const data::Dataset& dataset);

/// Scorer whose reference set is the model's representation of `train`.
ScorerConfig make_scorer(ScorerKind kind, int k, const model::Detector& model, const data::Dataset& train);

}  // namespace pcir::scoring
