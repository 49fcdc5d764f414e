#include "pcir/optim.hpp"

#include <cmath>

namespace pcir {

namespace {

void check_shapes(const std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size())
    throw ConfigError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                      std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols())
      throw ConfigError("optimizer: gradient " + std::to_string(i) + " has shape " +
                        shape_str(grads[i]) + ", parameter has " + shape_str(params[i]));
    require_finite(grads[i], "gradient");
  }
}

}  // namespace

void adam_step(OptimizerState& state, std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  check_shapes(params, grads);
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ConfigError("optimizer state/parameter count mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (m.rows() != params[i].rows() || m.cols() != params[i].cols())
      throw ConfigError("optimizer moment shape mismatch");
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i].cwiseAbs2();
    params[i].array() -= state.learning_rate * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + state.epsilon);
  }
}

void sgd_step(OptimizerState& state, std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  check_shapes(params, grads);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= state.learning_rate * grads[i];
}

void optimizer_step(OptimizerState& state, std::vector<Matrix>& params,
                    const std::vector<Matrix>& grads) {
  if (state.kind == OptimizerKind::Adam) adam_step(state, params, grads);
  else sgd_step(state, params, grads);
}

}  // namespace pcir
