#include "pcir/scoring.hpp"

namespace pcir::scoring {

const char* to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::Knn: return "knn";
    case ScorerKind::Reconstruction: return "reconstruction";
    case ScorerKind::CosineNorm: return "cosine-norm";
  }
  return "?";
}

void ScorerConfig::validate() const {
  if (k < 1) throw ConfigError("scorer: k must be >= 1");
  if (kind != ScorerKind::Reconstruction) {
    if (refs.rows() == 0) throw ConfigError("scorer: reference set must not be empty");
    if (kind == ScorerKind::Knn && k > refs.rows()) throw ConfigError("scorer: k exceeds reference set size");
  }
}

std::vector<double> Scores::of_label(int w) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < score.size(); ++i)
    if (label[i] == w) out.push_back(score[i]);
  return out;
}

std::vector<double> score_rows(const ScorerConfig& scorer, const Matrix& x, const Matrix& x_hat) {
  scorer.validate();
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  switch (scorer.kind) {
    case ScorerKind::Knn:
      for (Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = knn_score(scorer.refs, x.row(i), scorer.k);
      break;
    case ScorerKind::CosineNorm:
      for (Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = cosine_norm_score(scorer.refs, x.row(i));
      break;
    case ScorerKind::Reconstruction:
      if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols())
        throw ConfigError("score_rows: reconstruction needs x_hat with the shape of x");
      for (Index i = 0; i < x.rows(); ++i)
        out[static_cast<std::size_t>(i)] = reconstruction_score(x.row(i), x_hat.row(i));
      break;
  }
  return out;
}

Scores score_dataset(const model::Detector& model, const ScorerConfig& scorer, const data::Dataset& dataset) {
  if (dataset.dim() != model.input_dim())
    throw ConfigError("score_dataset: model expects " + std::to_string(model.input_dim()) + " features, dataset has " +
                      std::to_string(dataset.dim()));
  Scores s;
  if (scorer.kind == ScorerKind::Reconstruction) {
    s.score = score_rows(scorer, dataset.features, model::reconstruct(model, dataset.features));
  } else {
    if (scorer.refs.cols() != model.rep_dim()) throw ConfigError("score_dataset: reference dimension mismatch");
    s.score = score_rows(scorer, model::encode(model, dataset.features));
  }
  s.label = dataset.label;
  s.env = dataset.env;
  return s;
}

ScorerConfig make_scorer(ScorerKind kind, int k, const model::Detector& model, const data::Dataset& train) {
  ScorerConfig s;
  s.kind = kind;
  s.k = k;
  if (kind != ScorerKind::Reconstruction) s.refs = model::encode(model, train.features);
  s.validate();
  return s;
}

}  // namespace pcir::scoring
