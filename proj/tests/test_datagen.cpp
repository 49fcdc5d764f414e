#include <cmath>

#include <gtest/gtest.h>

#include "pcir/datagen.hpp"
#include "pcir/eval.hpp"
#include "pcir/io.hpp"
#include "pcir/mmd.hpp"
#include "reference.hpp"

using namespace pcir;
using namespace pcir::data;

namespace {

double correlation(const Vector& a, const Vector& b) {
  const Vector x = a.array() - a.mean(), y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())); }

Vector to_vector(const std::vector<int>& v) {
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i];
  return out;
}

ScmConfig one_env() {
  ScmConfig c = default_scenario();
  c.env_style_means = {Vector::Constant(c.d_e, 0.7)};
  c.shortcut = 0.0;
  return c;
}

}  // namespace

TEST(SampleTrain, LawOfLargeNumbers) {
  const ScmConfig c = one_env();
  const Index n = 20000;
  const Dataset d = sample_train(c, n, 1);
  Vector expect(c.dim());
  expect << c.mu_normal, c.env_style_means[0];
  const Vector mean = d.features.colwise().mean();
  for (Index j = 0; j < c.dim(); ++j) EXPECT_NEAR(mean(j), expect(j), 3.0 / std::sqrt(static_cast<double>(n))) << j;
}

TEST(SampleTrain, OnlyNormals) {
  const Dataset d = sample_train(default_scenario(), 100, 2);
  EXPECT_EQ(d.size(), 200);
  for (int w : d.label) EXPECT_EQ(w, 0);
  EXPECT_EQ(d.rows_of_env(0).size(), 100u);
  EXPECT_EQ(d.rows_of_env(1).size(), 100u);
}

TEST(SampleTrain, Deterministic) {
  const Dataset a = sample_train(default_scenario(), 64, 5), b = sample_train(default_scenario(), 64, 5);
  EXPECT_EQ(io::dataset_csv(a), io::dataset_csv(b));
  EXPECT_NE(io::dataset_csv(a), io::dataset_csv(sample_train(default_scenario(), 64, 6)));
}

TEST(SampleTrain, ContentAndStyleIndependentWithoutShortcut) {
  ScmConfig c = default_scenario();
  c.shortcut = 0.0;
  const Dataset d = sample_train(c, 5000, 3);
  for (int a = 0; a < c.d_a; ++a)
    for (int e = 0; e < c.d_e; ++e) {
      // Within one environment; pooling environments would add the mean offset.
      const auto rows = d.rows_of_env(0);
      Vector xa(static_cast<Index>(rows.size())), xe(static_cast<Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        xa(static_cast<Index>(i)) = d.unmixed(rows[i], a);
        xe(static_cast<Index>(i)) = d.unmixed(rows[i], c.d_a + e);
      }
      EXPECT_LT(std::abs(correlation(xa, xe)), 0.1);
    }
}

TEST(SampleTrain, InvalidConfig) {
  ScmConfig c = default_scenario();
  c.mu_anomaly = c.mu_normal;
  EXPECT_THROW(sample_train(c, 10, 0), ConfigError);
  c = default_scenario();
  c.sigma_e = 0.0;
  EXPECT_THROW(sample_train(c, 10, 0), ConfigError);
  c = default_scenario();
  c.env_style_means[1] = c.env_style_means[0];
  EXPECT_THROW(sample_train(c, 10, 0), ConfigError);
  EXPECT_THROW(sample_train(default_scenario(), 0, 0), ConfigError);
}

TEST(SampleTest, Balanced) {
  const Dataset d = sample_test(default_scenario(), 37, intervene_domain(default_scenario(), 0), 1);
  EXPECT_EQ(std::count(d.label.begin(), d.label.end(), 0), 37);
  EXPECT_EQ(std::count(d.label.begin(), d.label.end(), 1), 37);
}

TEST(SampleTest, OracleAurocMatchesGaussianOverlap) {
  ScmConfig c;
  c.d_a = 1;
  c.d_e = 1;
  c.mu_normal = Vector::Zero(1);
  c.mu_anomaly = Vector::Constant(1, 4.0);
  c.env_style_means = {Vector::Zero(1)};
  const Dataset d = sample_test(c, 10000, intervene_domain(c, 0), 7);
  std::vector<double> normal, anomaly;
  for (Index i = 0; i < d.size(); ++i)
    (d.label[static_cast<std::size_t>(i)] ? anomaly : normal).push_back(std::abs(d.unmixed(i, 0) - 0.0));
  const double expect = reference::phi(4.0 / std::sqrt(2.0));
  EXPECT_NEAR(expect, 0.99766, 1e-5);
  EXPECT_NEAR(eval::auroc(normal, anomaly), expect, 0.005);
}

TEST(SampleTest, IndistinguishableClasses) {
  ScmConfig c;
  c.d_a = 1;
  c.d_e = 1;
  c.mu_normal = Vector::Zero(1);
  c.mu_anomaly = Vector::Constant(1, 1e-9);
  c.env_style_means = {Vector::Zero(1)};
  const Dataset d = sample_test(c, 10000, intervene_domain(c, 0), 8);
  std::vector<double> normal, anomaly;
  for (Index i = 0; i < d.size(); ++i) (d.label[static_cast<std::size_t>(i)] ? anomaly : normal).push_back(std::abs(d.unmixed(i, 0)));
  EXPECT_NEAR(eval::auroc(normal, anomaly), 0.5, 0.015);
}

TEST(SampleTest, ShortcutShiftsAnomalyStyle) {
  const ScmConfig c = default_scenario();
  const Dataset d = sample_test(c, 5000, intervene_domain(c, 0), 9);
  for (int e = 0; e < c.d_e; ++e) {
    double n0 = 0.0, n1 = 0.0;
    for (Index i = 0; i < d.size(); ++i) (d.label[static_cast<std::size_t>(i)] ? n1 : n0) += d.unmixed(i, c.d_a + e);
    EXPECT_NEAR((n1 - n0) / 5000.0, c.shortcut, 0.1);
  }
}

TEST(Interventions, ObservationalConfoundingAndDomainIntervention) {
  ScmConfig c = default_scenario();
  c.confounding = 1.0;
  const Dataset obs = sample_test(c, 5000, observational(), 10);
  EXPECT_GT(std::abs(correlation(to_vector(obs.latent_u), to_vector(obs.env))), 0.2);
  EXPECT_GT(std::abs(correlation(to_vector(obs.label), to_vector(obs.env))), 0.1);

  // Under do(E = e) the environment no longer depends on U: mix two
  // interventions with equal sizes and check the U-E correlation vanishes.
  const Dataset d0 = sample_test(c, 5000, intervene_domain(c, 0), 11);
  const Dataset d1 = sample_test(c, 5000, intervene_domain(c, 1), 12);
  std::vector<double> u = d0.latent_u;
  u.insert(u.end(), d1.latent_u.begin(), d1.latent_u.end());
  std::vector<int> env = d0.env;
  env.insert(env.end(), d1.env.begin(), d1.env.end());
  EXPECT_LT(std::abs(correlation(to_vector(u), to_vector(env))), 0.03);
}

TEST(Interventions, DomainEqualsConditioningWithoutConfounding) {
  const ScmConfig c = default_scenario();
  const Dataset a = sample_test(c, 2000, intervene_domain(c, 1), 13);
  const Dataset train = sample_train(c, 2000, 14);
  const Matrix normals = a.features.topRows(2000);
  const Matrix env1 = train.subset(train.rows_of_env(1)).features;
  EXPECT_LT((normals.colwise().mean() - env1.colwise().mean()).cwiseAbs().maxCoeff(), 5.0 * std::sqrt(2.0 / 2000.0));
}

TEST(Interventions, DomainShiftDisplacesStyleByShift) {
  const ScmConfig c = default_scenario();
  const EnvSpec spec = domain_shift_env(c);
  const Dataset d = sample_test(c, 5000, spec, 15);
  const Vector style = d.unmixed.topRows(5000).rightCols(c.d_e).colwise().mean();
  for (int e = 0; e < c.d_e; ++e) EXPECT_NEAR(style(e) - c.env_style_means[0](e), c.shift, 0.05);
}

TEST(Interventions, CovariateClamp) {
  const ScmConfig c = default_scenario();
  const Dataset a = sample_test(c, 200, intervene_covariate(c, c.env_style_means[0]), 16);
  for (Index i = 0; i < a.size(); ++i) EXPECT_EQ(Vector(a.unmixed.row(i).tail(c.d_e).transpose()), c.env_style_means[0]);
  Vector other = Vector::Constant(c.d_e, -2.0);
  const Dataset b = sample_test(c, 200, intervene_covariate(c, other), 16);
  EXPECT_EQ(a.unmixed.leftCols(c.d_a), b.unmixed.leftCols(c.d_a));
  EXPECT_NE(a.unmixed.rightCols(c.d_e), b.unmixed.rightCols(c.d_e));
  EXPECT_THROW(intervene_covariate(c, Vector::Zero(2)), ConfigError);
}

TEST(Interventions, ContentProjectionIsInvariantUnderClamps) {
  const ScmConfig c = default_scenario();
  const Dataset a = sample_test(c, 300, intervene_covariate(c, Vector::Constant(c.d_e, 1.0)), 17);
  const Dataset b = sample_test(c, 300, intervene_covariate(c, Vector::Constant(c.d_e, -4.0)), 18);
  const Matrix za = a.unmixed.leftCols(c.d_a), zb = b.unmixed.leftCols(c.d_a);
  const Matrix sa = a.unmixed.rightCols(c.d_e), sb = b.unmixed.rightCols(c.d_e);
  EXPECT_LT(mmd2_biased(za, zb, KernelConfig::median()), 0.01);
  EXPECT_GT(mmd2_biased(sa, sb, KernelConfig::median()), 0.5);
}

TEST(ShiftSuite, CumulativeShifts) {
  const ScmConfig c = default_scenario();
  const auto suite = covariate_shift_suite(c);
  ASSERT_EQ(suite.size(), 5u);
  EXPECT_EQ(suite[0].name, "e0");
  EXPECT_EQ(suite[0].style_mean, c.env_style_means[0]);
  for (int i = 1; i <= 4; ++i) {
    const Vector diff = suite[static_cast<std::size_t>(i)].style_mean - c.env_style_means[0];
    for (int j = 0; j < c.d_e; ++j) EXPECT_EQ(diff(j), j < i ? c.shift : 0.0) << "e" << i << " dim " << j;
  }
  EXPECT_THROW(covariate_shift_env(c, 5), ConfigError);
  ScmConfig small = c;
  small.d_e = 3;
  for (auto& v : small.env_style_means) v = v.head(3).eval();
  EXPECT_THROW(covariate_shift_suite(small), ConfigError);
}

TEST(ShiftSuite, GeneratedDisplacement) {
  const ScmConfig c = default_scenario();
  const Dataset d = sample_test(c, 5000, covariate_shift_env(c, 2), 19);
  const Vector style = d.unmixed.topRows(5000).rightCols(c.d_e).colwise().mean();
  EXPECT_NEAR(style(0) - c.env_style_means[0](0), c.shift, 0.05);
  EXPECT_NEAR(style(1) - c.env_style_means[0](1), c.shift, 0.05);
  EXPECT_NEAR(style(2) - c.env_style_means[0](2), 0.0, 0.05);
  EXPECT_NEAR(style(3) - c.env_style_means[0](3), 0.0, 0.05);
}

TEST(Mixing, OrthogonalPreservesDistances) {
  ScmConfig c = default_scenario();
  c.mixing = Mixing::Orthogonal;
  c.seed = 21;
  const Matrix m = mixing_matrix(c);
  EXPECT_LT((m * m.transpose() - Matrix::Identity(c.dim(), c.dim())).cwiseAbs().maxCoeff(), 1e-12);
  const Dataset d = sample_train(c, 50, 22);
  for (Index i = 0; i < d.size(); ++i)
    for (Index j = i + 1; j < d.size(); ++j)
      EXPECT_NEAR((d.features.row(i) - d.features.row(j)).norm(), (d.unmixed.row(i) - d.unmixed.row(j)).norm(), 1e-10);
  EXPECT_NE(d.features, d.unmixed);
}
