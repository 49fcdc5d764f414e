#include "pcir/models.hpp"

#include <algorithm>
#include <cmath>

#include "pcir/rng.hpp"

namespace pcir::model {

const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
const char* to_string(Objective o) { return o == Objective::Compactness ? "compactness" : "autoencoder"; }
const char* to_string(OptimizerKind o) { return o == OptimizerKind::Adam ? "adam" : "sgd"; }

void EncoderConfig::validate() const {
  if (hidden.empty()) throw ConfigError("encoder: at least one hidden layer required");
  for (int w : hidden)
    if (w < 1) throw ConfigError("encoder: layer widths must be >= 1");
  if (rep_dim < 2) throw ConfigError("encoder: representation dimension must be >= 2");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train: lambda must be a finite value >= 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_per_env < 2) throw ConfigError("train: batch size per environment must be >= 2");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  kernel.validate();
}

Mlp Mlp::init(const std::vector<int>& widths, Activation act, Rng& rng) {
  Mlp m;
  m.activation = act;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double a = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    Matrix w(widths[l], widths[l + 1]);
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
    Matrix b(1, widths[l + 1]);
    for (Index j = 0; j < b.cols(); ++j) b(0, j) = rng.uniform(-a, a);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.cols() != in_dim())
    throw ConfigError("network expects " + std::to_string(in_dim()) + " inputs, got " + std::to_string(x.cols()));
  Matrix h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = (h * weights[l]).rowwise() + biases[l].row(0);
    if (l + 1 < weights.size()) {
      if (activation == Activation::Tanh) h = h.array().tanh().matrix();
      else h = h.array().max(0.0).matrix();
    }
  }
  require_finite(h, "network output");
  return h;
}

ad::Var Mlp::forward(ad::Var x, const std::vector<ad::Var>& params) const {
  if (params.size() != 2 * weights.size()) throw ConfigError("network: wrong number of parameter leaves");
  if (x.cols() != in_dim())
    throw ConfigError("network expects " + std::to_string(in_dim()) + " inputs, got " + std::to_string(x.cols()));
  ad::Var h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = ad::add(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < weights.size()) h = activation == Activation::Tanh ? ad::tanh(h) : ad::relu(h);
  }
  return h;
}

std::vector<Matrix> Mlp::parameters() const {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

void Mlp::set_parameters(const std::vector<Matrix>& flat) {
  if (flat.size() != 2 * weights.size()) throw ConfigError("network: wrong number of parameter tensors");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (flat[2 * l].rows() != weights[l].rows() || flat[2 * l].cols() != weights[l].cols() ||
        flat[2 * l + 1].cols() != biases[l].cols())
      throw ConfigError("network: parameter shape mismatch");
    weights[l] = flat[2 * l];
    biases[l] = flat[2 * l + 1];
  }
}

Matrix encode(const Detector& model, const Matrix& x) { return model.encoder.forward(x); }

Matrix reconstruct(const Detector& model, const Matrix& x) {
  if (model.decoder.empty()) throw ConfigError("reconstruct: model has no decoder");
  return model.decoder.forward(model.encoder.forward(x));
}

double compactness_loss(const Matrix& z, const Vector& center) {
  if (center.size() != z.cols()) throw ConfigError("compactness_loss: center dimension mismatch");
  if (z.rows() == 0) throw ConfigError("compactness_loss: empty batch");
  return (z.rowwise() - center.transpose()).rowwise().squaredNorm().mean();
}

double reconstruction_loss(const Matrix& x, const Matrix& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw ConfigError("reconstruction_loss: shape mismatch " + shape_str(x) + " vs " + shape_str(x_hat));
  if (x.rows() == 0) throw ConfigError("reconstruction_loss: empty batch");
  return (x - x_hat).rowwise().squaredNorm().mean();
}

double composite_loss(double task, double pcir_value, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("composite_loss: lambda must be >= 0");
  return task + lambda * pcir_value;
}

namespace ad_loss {

ad::Var compactness_loss(ad::Var z, const Vector& center) {
  if (center.size() != z.cols()) throw ConfigError("compactness_loss: center dimension mismatch");
  ad::Var c = z.tape->constant(center.transpose());
  return ad::scale(ad::sum(ad::square(ad::sub(z, c))), 1.0 / static_cast<double>(z.rows()));
}

ad::Var reconstruction_loss(ad::Var x, ad::Var x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw ConfigError("reconstruction_loss: shape mismatch");
  return ad::scale(ad::sum(ad::square(ad::sub(x, x_hat))), 1.0 / static_cast<double>(x.rows()));
}

ad::Var composite_loss(ad::Var task, ad::Var pcir_value, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("composite_loss: lambda must be >= 0");
  return ad::add(task, ad::scale(pcir_value, lambda));
}

}  // namespace ad_loss

namespace {

std::vector<Index> permutation(Index n, Rng& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i)
    std::swap(p[static_cast<std::size_t>(i)], p[rng.below(static_cast<std::uint64_t>(i + 1))]);
  return p;
}

}  // namespace

FitResult fit(const TrainConfig& train, const EncoderConfig& enc, const data::Dataset& dataset) {
  train.validate();
  enc.validate();
  if (dataset.size() == 0) throw ConfigError("fit: empty dataset");
  for (int l : dataset.label)
    if (l != 0) throw ConfigError("fit: training data must contain normal samples only (found W=1)");

  FitResult result;
  const std::vector<int> envs = dataset.env_ids();
  std::vector<std::vector<Index>> rows;
  for (int e : envs) {
    rows.push_back(dataset.rows_of_env(e));
    if (rows.back().size() < 2)
      throw ConfigError("fit: environment " + std::to_string(e) + " has fewer than 2 samples");
    if (static_cast<int>(rows.back().size()) < train.batch_per_env)
      result.warnings.push_back("environment " + std::to_string(e) + " has fewer samples than the batch size; " +
                                "drawing with replacement");
  }

  Rng init_rng(enc.seed);
  Detector& model = result.model;
  model.encoder_cfg = enc;
  model.train_cfg = train;
  std::vector<int> widths{static_cast<int>(dataset.dim())};
  widths.insert(widths.end(), enc.hidden.begin(), enc.hidden.end());
  widths.push_back(enc.rep_dim);
  model.encoder = Mlp::init(widths, enc.activation, init_rng);
  if (train.objective == Objective::Autoencoder) {
    std::vector<int> back(widths.rbegin(), widths.rend());
    model.decoder = Mlp::init(back, enc.activation, init_rng);
  }

  std::vector<Matrix> params = model.encoder.parameters();
  const std::size_t n_enc = params.size();
  for (auto& p : model.decoder.parameters()) params.push_back(std::move(p));

  OptimizerState opt;
  opt.kind = train.optimizer;
  opt.learning_rate = train.learning_rate;

  Rng rng(train.seed);
  const Index batch = train.batch_per_env;
  std::size_t largest = 0;
  for (const auto& r : rows) largest = std::max(largest, r.size());
  const Index steps = (static_cast<Index>(largest) + batch - 1) / batch;

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    model.encoder.set_parameters({params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n_enc)});
    if (train.objective == Objective::Compactness)
      model.center = model.encoder.forward(dataset.features).colwise().mean().transpose();

    std::vector<std::vector<Index>> perms;
    for (const auto& r : rows) perms.push_back(permutation(static_cast<Index>(r.size()), rng));

    EpochRecord rec;
    for (Index s = 0; s < steps; ++s) {
      Matrix x(batch * static_cast<Index>(rows.size()), dataset.dim());
      for (std::size_t e = 0; e < rows.size(); ++e) {
        const Index n = static_cast<Index>(rows[e].size());
        for (Index j = 0; j < batch; ++j) {
          const Index pick = n >= batch ? perms[e][static_cast<std::size_t>((s * batch + j) % n)]
                                        : static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
          x.row(static_cast<Index>(e) * batch + j) = dataset.features.row(rows[e][static_cast<std::size_t>(pick)]);
        }
      }

      ad::Tape tape;
      ad::Var xv = tape.constant(x);
      std::vector<ad::Var> leaves;
      for (const auto& p : params) leaves.push_back(tape.parameter(p));
      const std::vector<ad::Var> enc_leaves(leaves.begin(), leaves.begin() + static_cast<std::ptrdiff_t>(n_enc));
      ad::Var z = model.encoder.forward(xv, enc_leaves);

      ad::Var task{};
      if (train.objective == Objective::Compactness) {
        task = ad_loss::compactness_loss(z, model.center);
      } else {
        const std::vector<ad::Var> dec_leaves(leaves.begin() + static_cast<std::ptrdiff_t>(n_enc), leaves.end());
        task = ad_loss::reconstruction_loss(xv, model.decoder.forward(z, dec_leaves));
      }

      ad::Var total = task;
      double pcir_raw = 0.0;
      if (train.regularize) {
        std::vector<ad::EnvReps> per_env;
        for (std::size_t e = 0; e < rows.size(); ++e)
          per_env.push_back({envs[e], ad::slice(z, 0, static_cast<Index>(e) * batch, batch), 0});
        ad::Var reg = ad::pcir(per_env, train.kernel);
        pcir_raw = reg.scalar();
        total = ad_loss::composite_loss(task, reg, train.lambda);
      }
      tape.backward(total);

      std::vector<Matrix> grads;
      for (const auto& l : leaves) grads.push_back(l.grad());
      optimizer_step(opt, params, grads);

      rec.task += task.scalar();
      rec.pcir += pcir_raw;
      rec.total += total.scalar();
    }
    const double inv = 1.0 / static_cast<double>(steps);
    result.history.push_back({rec.task * inv, rec.pcir * inv, rec.total * inv});
  }

  model.encoder.set_parameters({params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n_enc)});
  if (!model.decoder.empty())
    model.decoder.set_parameters({params.begin() + static_cast<std::ptrdiff_t>(n_enc), params.end()});
  if (train.objective == Objective::Compactness)
    model.center = model.encoder.forward(dataset.features).colwise().mean().transpose();
  return result;
}

}  // namespace pcir::model
