#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace pcir {

// Every tensor in the toolkit is rank 2 and row-major: a batch is rows x
// features, a vector is 1 x d and a scalar is 1 x 1.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using Index = Eigen::Index;

/// Raised when a value becomes NaN or infinite, or an estimator is fed data
/// it cannot handle numerically.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed configuration or precondition violations that the
/// caller can fix.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename Derived>
std::string shape_str(const Eigen::MatrixBase<Derived>& m) {
  return shape_str(m.rows(), m.cols());
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite value in ") + what);
}

}  // namespace pcir
