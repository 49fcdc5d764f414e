#include "pcir/mmd.hpp"

namespace pcir {

void KernelConfig::validate() const {
  if (mode == BandwidthMode::Fixed) {
    if (bandwidths.empty()) throw ConfigError("kernel: fixed mode needs at least one bandwidth");
    for (double s : bandwidths)
      if (!(s > 0.0)) throw ConfigError("kernel: bandwidths must be positive");
  } else {
    if (multipliers.empty()) throw ConfigError("kernel: median mode needs at least one multiplier");
    for (double s : multipliers)
      if (!(s > 0.0)) throw ConfigError("kernel: bandwidth multipliers must be positive");
  }
  if (!weights.empty()) {
    if (weights.size() != size()) throw ConfigError("kernel: one weight per bandwidth required");
    for (double w : weights)
      if (!(w >= 0.0)) throw ConfigError("kernel: weights must be nonnegative");
  }
}

namespace {

void check_pcir_batches(std::size_t count, auto&& label_of, auto&& cols_of) {
  for (std::size_t i = 0; i < count; ++i) {
    if (label_of(i) != 0) throw ConfigError("pcir: batches must contain normal samples only (W=0)");
    if (cols_of(i) != cols_of(0)) throw ConfigError("pcir: representation dimensions differ");
  }
}

}  // namespace

double pcir(const std::vector<EnvBatch>& batches, const KernelConfig& cfg) {
  check_pcir_batches(
      batches.size(), [&](std::size_t i) { return batches[i].label; },
      [&](std::size_t i) { return batches[i].reps.cols(); });
  double total = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i)
    for (std::size_t j = i + 1; j < batches.size(); ++j)
      total += mmd2_biased(batches[i].reps, batches[j].reps, cfg);
  return total;
}

namespace ad {

namespace {

// Squared distances between rows of A and B as a tape expression:
// |a|^2 1^T + 1 |b|^2^T - 2 A B^T.
Var sq_dists(Var A, Var B) {
  Tape& t = *A.tape;
  const Index d = A.cols();
  Var ones_col = t.constant(Matrix::Ones(d, 1));
  Var ones_row = t.constant(Matrix::Ones(1, d));
  Var a2 = matmul(square(A), ones_col);                 // m x 1
  Var b2 = matmul(ones_row, square(B), false, true);    // 1 x n
  Var cross = matmul(A, B, false, true);                // m x n
  return sub(add(a2, b2), scale(cross, 2.0));
}

Var gram_mean(Var sq, double sigma) { return mean(exp(scale(sq, -1.0 / (2.0 * sigma * sigma)))); }

}  // namespace

Var mmd2_biased(Var A, Var B, const std::vector<double>& sigmas, const std::vector<double>& weights) {
  if (A.tape != B.tape) throw ConfigError("mmd2_biased: operands on different tapes");
  detail::check_sets(A.value(), B.value(), 1, "mmd2_biased");
  if (sigmas.empty()) throw ConfigError("mmd2_biased: no bandwidths");
  if (!weights.empty() && weights.size() != sigmas.size())
    throw ConfigError("mmd2_biased: one weight per bandwidth required");
  const Var daa = sq_dists(A, A), dbb = sq_dists(B, B), dab = sq_dists(A, B);
  Var total{};
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    if (!(sigmas[k] > 0.0)) throw ConfigError("mmd2_biased: bandwidths must be positive");
    const double w = weights.empty() ? 1.0 / static_cast<double>(sigmas.size()) : weights[k];
    Var term = sub(add(gram_mean(daa, sigmas[k]), gram_mean(dbb, sigmas[k])), scale(gram_mean(dab, sigmas[k]), 2.0));
    term = scale(term, w);
    total = k == 0 ? term : add(total, term);
  }
  return total;
}

Var mmd2_biased(Var A, Var B, const KernelConfig& cfg) {
  return mmd2_biased(A, B, resolve_bandwidths(cfg, A.value(), B.value()), cfg.weights);
}

Var pcir(const std::vector<EnvReps>& batches, const KernelConfig& cfg) {
  if (batches.empty()) throw ConfigError("pcir: no environments");
  check_pcir_batches(
      batches.size(), [&](std::size_t i) { return batches[i].label; },
      [&](std::size_t i) { return batches[i].reps.cols(); });
  Tape& t = *batches.front().reps.tape;
  Var total = t.constant(Matrix::Zero(1, 1));
  for (std::size_t i = 0; i < batches.size(); ++i)
    for (std::size_t j = i + 1; j < batches.size(); ++j)
      total = add(total, mmd2_biased(batches[i].reps, batches[j].reps, cfg));
  return total;
}

}  // namespace ad

}  // namespace pcir
