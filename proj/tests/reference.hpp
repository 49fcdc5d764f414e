#pragma once

// Brute-force reference implementations. Deliberately naive: plain loops over
// std::vector, no Eigen expressions, no shared code with the library.

#include <cmath>
#include <functional>
#include <vector>

#include "pcir/tensor.hpp"

namespace reference {

using Rows = std::vector<std::vector<double>>;

inline Rows rows(const pcir::Matrix& m) {
  Rows out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (pcir::Index i = 0; i < m.rows(); ++i)
    for (pcir::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double k(const std::vector<double>& a, const std::vector<double>& b, double sigma) {
  return std::exp(-sq_dist(a, b) / (2.0 * sigma * sigma));
}

inline double mmd2_biased(const Rows& A, const Rows& B, double sigma) {
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (const auto& x : A)
    for (const auto& y : A) aa += k(x, y, sigma);
  for (const auto& x : B)
    for (const auto& y : B) bb += k(x, y, sigma);
  for (const auto& x : A)
    for (const auto& y : B) ab += k(x, y, sigma);
  const double m = static_cast<double>(A.size()), n = static_cast<double>(B.size());
  return aa / (m * m) + bb / (n * n) - 2.0 * ab / (m * n);
}

inline double mmd2_unbiased(const Rows& A, const Rows& B, double sigma) {
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < A.size(); ++j)
      if (i != j) aa += k(A[i], A[j], sigma);
  for (std::size_t i = 0; i < B.size(); ++i)
    for (std::size_t j = 0; j < B.size(); ++j)
      if (i != j) bb += k(B[i], B[j], sigma);
  for (const auto& x : A)
    for (const auto& y : B) ab += k(x, y, sigma);
  const double m = static_cast<double>(A.size()), n = static_cast<double>(B.size());
  return aa / (m * (m - 1)) + bb / (n * (n - 1)) - 2.0 * ab / (m * n);
}

inline double auroc_pairwise(const std::vector<double>& normal, const std::vector<double>& anomaly) {
  double wins = 0.0;
  for (double a : anomaly)
    for (double n : normal) wins += a > n ? 1.0 : (a == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(normal.size()) * static_cast<double>(anomaly.size()));
}

/// Standard normal CDF.
inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Central difference of f along coordinate (i, j) of m.
inline double central_difference(const std::function<double(const pcir::Matrix&)>& f, pcir::Matrix m,
                                 pcir::Index i, pcir::Index j, double h = 1e-5) {
  const double x = m(i, j);
  m(i, j) = x + h;
  const double up = f(m);
  m(i, j) = x - h;
  const double down = f(m);
  return (up - down) / (2.0 * h);
}

/// Relative error with an absolute floor so that near-zero gradients compare
/// sensibly.
inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({1e-4, std::abs(a), std::abs(b)}); }

}  // namespace reference
