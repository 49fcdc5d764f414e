#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "pcir/config.hpp"
#include "pcir/experiment.hpp"
#include "pcir/rng.hpp"
#include "pcir/scoring.hpp"

using namespace pcir;
using namespace pcir::scoring;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(Knn, Examples) {
  const Matrix refs = col({0.0, 10.0});
  EXPECT_EQ(knn_score(refs, vec({0.0}), 1), 0.0);
  EXPECT_EQ(knn_score(refs, vec({2.0}), 1), 2.0);
  EXPECT_EQ(knn_score(refs, vec({2.0}), 2), 5.0);
  EXPECT_THROW(knn_score(refs, vec({2.0}), 3), ConfigError);
  EXPECT_THROW(knn_score(refs, vec({2.0}), 0), ConfigError);
  EXPECT_THROW(knn_score(refs, vec({2.0, 1.0}), 1), ConfigError);
}

TEST(Knn, AllReferencesIsMeanDistance) {
  Rng rng(1);
  const Matrix refs = rng.normal_matrix(9, 3);
  const Vector z = rng.normal_matrix(3, 1);
  double mean = 0.0;
  for (Index i = 0; i < refs.rows(); ++i) mean += (refs.row(i).transpose() - z).norm() / 9.0;
  EXPECT_NEAR(knn_score(refs, z, 9), mean, 1e-12);
}

TEST(Knn, MatchesFullDistanceMatrix) {
  Rng rng(2);
  const Matrix refs = rng.normal_matrix(30, 4), queries = rng.normal_matrix(20, 4);
  ScorerConfig cfg;
  cfg.k = 3;
  cfg.refs = refs;
  const auto scores = score_rows(cfg, queries);
  for (Index q = 0; q < queries.rows(); ++q) {
    std::vector<double> d;
    for (Index r = 0; r < refs.rows(); ++r) d.push_back(std::sqrt((queries.row(q) - refs.row(r)).squaredNorm()));
    std::sort(d.begin(), d.end());
    EXPECT_NEAR(scores[static_cast<std::size_t>(q)], (d[0] + d[1] + d[2]) / 3.0, 1e-12);
  }
}

TEST(Reconstruction, Examples) {
  EXPECT_EQ(reconstruction_score(vec({1.0, 2.0}), vec({1.0, 2.0})), 0.0);
  EXPECT_EQ(reconstruction_score(vec({1.0, 2.0}), vec({0.0, 0.0})), 5.0);
  EXPECT_THROW(reconstruction_score(vec({1.0, 2.0}), vec({0.0})), ConfigError);
}

TEST(Reconstruction, BatchMatchesSingleSample) {
  Rng rng(3);
  const Matrix x = rng.normal_matrix(8, 3), xh = rng.normal_matrix(8, 3);
  ScorerConfig cfg;
  cfg.kind = ScorerKind::Reconstruction;
  const auto s = score_rows(cfg, x, xh);
  for (Index i = 0; i < 8; ++i) EXPECT_EQ(s[static_cast<std::size_t>(i)], reconstruction_score(x.row(i), xh.row(i)));
}

TEST(CosineNorm, Examples) {
  Matrix refs(2, 2);
  refs << 1, 0, 0, 3;
  EXPECT_NEAR(cosine_norm_score(refs, vec({2.0, 0.0})), -2.0, 1e-15);
  Matrix one(1, 2);
  one << 1, 0;
  EXPECT_EQ(cosine_norm_score(one, vec({0.0, 5.0})), 0.0);
  EXPECT_EQ(cosine_norm_score(refs, vec({0.0, 0.0})), 0.0);
  EXPECT_THROW(cosine_norm_score(Matrix(0, 2), vec({1.0, 0.0})), ConfigError);
}

TEST(Scorers, ReferenceOrderInvariant) {
  Rng rng(4);
  const Matrix refs = rng.normal_matrix(12, 3);
  const Matrix flipped = refs.colwise().reverse();
  for (int t = 0; t < 10; ++t) {
    const Vector z = rng.normal_matrix(3, 1);
    EXPECT_EQ(knn_score(refs, z, 2), knn_score(flipped, z, 2));
    EXPECT_EQ(cosine_norm_score(refs, z), cosine_norm_score(flipped, z));
  }
}

TEST(ScoreDataset, TrainingSetScoresZeroWithK1) {
  const auto train = data::sample_train(data::default_scenario(), 64, 5);
  model::TrainConfig t;
  t.epochs = 2;
  const auto fitted = model::fit(t, model::EncoderConfig{}, train);
  const ScorerConfig scorer = make_scorer(ScorerKind::Knn, 1, fitted.model, train);
  for (double s : score_dataset(fitted.model, scorer, train).score) EXPECT_EQ(s, 0.0);
}

TEST(ScoreDataset, PermutationEquivariant) {
  const auto cfg = data::default_scenario();
  const auto train = data::sample_train(cfg, 64, 6);
  model::TrainConfig t;
  t.epochs = 2;
  t.objective = model::Objective::Autoencoder;
  const auto fitted = model::fit(t, model::EncoderConfig{}, train);
  const auto test = data::sample_test(cfg, 20, data::intervene_domain(cfg, 0), 7);
  std::vector<Index> perm(static_cast<std::size_t>(test.size()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Index>(perm.size() - 1 - i);
  for (auto kind : {ScorerKind::Knn, ScorerKind::Reconstruction, ScorerKind::CosineNorm}) {
    const ScorerConfig scorer = make_scorer(kind, 2, fitted.model, train);
    const Scores a = score_dataset(fitted.model, scorer, test);
    const Scores b = score_dataset(fitted.model, scorer, test.subset(perm));
    for (std::size_t i = 0; i < perm.size(); ++i) {
      EXPECT_EQ(b.score[i], a.score[static_cast<std::size_t>(perm[i])]) << to_string(kind);
      EXPECT_EQ(b.label[i], a.label[static_cast<std::size_t>(perm[i])]);
    }
  }
}

TEST(ScoreDataset, AnomaliesScoreHigherInDistribution) {
  ExperimentConfig cfg = default_experiment();
  const auto r = experiment::run_seed(cfg, 0);
  const auto& s = r.scores;
  std::vector<double> normal, anomaly;
  for (std::size_t i = 0; i < s.score.size(); ++i)
    if (s.env[i] == 0) (s.label[i] ? anomaly : normal).push_back(s.score[i]);
  ASSERT_FALSE(normal.empty());
  EXPECT_GT(median(anomaly), median(normal));
}
