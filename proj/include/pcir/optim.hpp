#pragma once

#include <cstdint>
#include <vector>

#include "pcir/tensor.hpp"

namespace pcir {

enum class OptimizerKind { Adam, Sgd };

/// Adam/SGD state for a fixed list of parameter tensors. Moment buffers are
/// sized lazily on the first step and must keep matching the parameters.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update, in place.
void adam_step(OptimizerState& state, std::vector<Matrix>& params, const std::vector<Matrix>& grads);

/// theta <- theta - lr * g, in place.
void sgd_step(OptimizerState& state, std::vector<Matrix>& params, const std::vector<Matrix>& grads);

/// Dispatches on `state.kind`.
void optimizer_step(OptimizerState& state, std::vector<Matrix>& params,
                    const std::vector<Matrix>& grads);

}  // namespace pcir
