#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcir/autodiff.hpp"
#include "pcir/datagen.hpp"
#include "pcir/mmd.hpp"
#include "pcir/optim.hpp"
#include "pcir/tensor.hpp"

namespace pcir {
class Rng;
}

namespace pcir::model {

enum class Activation { Tanh, Relu };
enum class Objective { Compactness, Autoencoder };

const char* to_string(Activation a);
const char* to_string(Objective o);
const char* to_string(OptimizerKind o);

struct EncoderConfig {
  std::vector<int> hidden{32, 32};
  int rep_dim = 8;
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainConfig {
  double lambda = 0.0;
  int epochs = 60;
  int batch_per_env = 64;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 3e-3;
  Objective objective = Objective::Compactness;
  KernelConfig kernel;
  std::uint64_t seed = 0;
  /// When false the PCIR term is not even built (base objective only).
  bool regularize = true;

  void validate() const;
};

/// Fully connected network; hidden layers use the activation, the output
/// layer is linear.
struct Mlp {
  std::vector<Matrix> weights;  // in x out
  std::vector<Matrix> biases;   // 1 x out
  Activation activation = Activation::Tanh;

  static Mlp init(const std::vector<int>& widths, Activation act, Rng& rng);

  Index in_dim() const { return weights.empty() ? 0 : weights.front().rows(); }
  Index out_dim() const { return weights.empty() ? 0 : weights.back().cols(); }
  bool empty() const { return weights.empty(); }

  Matrix forward(const Matrix& x) const;
  /// `params` holds weight/bias leaves in layer order: W0, b0, W1, b1, ...
  ad::Var forward(ad::Var x, const std::vector<ad::Var>& params) const;

  std::vector<Matrix> parameters() const;
  void set_parameters(const std::vector<Matrix>& flat);
};

/// Trained encoder (plus decoder for the autoencoder objective).
struct Detector {
  EncoderConfig encoder_cfg;
  TrainConfig train_cfg;
  Mlp encoder;
  Mlp decoder;
  Vector center;

  Objective objective() const { return train_cfg.objective; }
  Index input_dim() const { return encoder.in_dim(); }
  Index rep_dim() const { return encoder.out_dim(); }
};

struct EpochRecord {
  double task = 0.0;
  double pcir = 0.0;  // raw, before weighting
  double total = 0.0;
};

struct FitResult {
  Detector model;
  std::vector<EpochRecord> history;
  std::vector<std::string> warnings;
};

Matrix encode(const Detector& model, const Matrix& x);
Matrix reconstruct(const Detector& model, const Matrix& x);

/// Mean over rows of |z - center|^2.
double compactness_loss(const Matrix& z, const Vector& center);
/// Mean over rows of |x - x_hat|^2.
double reconstruction_loss(const Matrix& x, const Matrix& x_hat);
double composite_loss(double task, double pcir_value, double lambda);

namespace ad_loss {
ad::Var compactness_loss(ad::Var z, const Vector& center);
ad::Var reconstruction_loss(ad::Var x, ad::Var x_hat);
ad::Var composite_loss(ad::Var task, ad::Var pcir_value, double lambda);
}  // namespace ad_loss

/// Trains with `task + lambda * PCIR`. Each step draws one mini-batch per
/// environment, evaluates the task loss on the pooled batch and PCIR across
/// the per-environment representation slices. The compactness center is
/// recomputed from the whole training set at the start of every epoch and
/// held fixed during it.
FitResult fit(const TrainConfig& train, const EncoderConfig& enc, const data::Dataset& dataset);

}  // namespace pcir::model
