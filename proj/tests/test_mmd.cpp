#include <cmath>

#include <gtest/gtest.h>

#include "pcir/mmd.hpp"
#include "pcir/rng.hpp"
#include "reference.hpp"

using namespace pcir;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix reversed_rows(const Matrix& m) { return m.colwise().reverse(); }

}  // namespace

TEST(RbfKernel, Examples) {
  const Vector x = Vector::Zero(2);
  EXPECT_EQ(rbf_kernel(x, x, 0.7), 1.0);
  Vector y(2);
  y << 1.0, 1.0;
  EXPECT_NEAR(rbf_kernel(x, y, 1.0), std::exp(-1.0), 1e-15);
  y << 3.0, 4.0;
  EXPECT_NEAR(rbf_kernel(x, y, 5.0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(rbf_kernel(x, y, 5.0), 0.606531, 1e-6);
}

TEST(RbfKernel, Errors) {
  const Vector x = Vector::Zero(2), y = Vector::Zero(3);
  EXPECT_THROW(rbf_kernel(x, y, 1.0), ConfigError);
  EXPECT_THROW(rbf_kernel(x, x, 0.0), ConfigError);
  EXPECT_THROW(rbf_kernel(x, x, -1.0), ConfigError);
}

TEST(MedianHeuristic, Examples) {
  EXPECT_EQ(median_heuristic(col({0.0, 1.0}), col({3.0})), 2.0);
  EXPECT_EQ(median_heuristic(col({0.0, 1.0, 3.0}), Matrix(0, 1)), 2.0);
  EXPECT_EQ(median_heuristic(col({1.5}), col({1.5})), 1.0);
  EXPECT_EQ(median_heuristic(col({0.0}), col({2.0})), 2.0);
  // Six zero distances and four of 0.7: the median is 0, so the smallest
  // nonzero distance is used.
  EXPECT_EQ(median_heuristic(col({0.0, 0.0, 0.0, 0.0}), col({0.7})), 0.7);
  EXPECT_THROW(median_heuristic(col({1.0}), Matrix(0, 1)), ConfigError);
}

TEST(Mmd2Biased, HandComputed) {
  const auto k = KernelConfig::fixed({1.0});
  EXPECT_NEAR(mmd2_biased(col({0.0}), col({2.0}), k), 2.0 - 2.0 * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(mmd2_biased(col({0.0}), col({2.0}), k), 1.729329, 1e-6);
  const Matrix a = col({0.3, -1.2, 4.0});
  EXPECT_EQ(mmd2_biased(a, a, k), 0.0);
}

TEST(Mmd2Biased, Errors) {
  const auto k = KernelConfig::fixed({1.0});
  EXPECT_THROW(mmd2_biased(Matrix(0, 1), col({1.0}), k), ConfigError);
  EXPECT_THROW(mmd2_biased(Matrix::Zero(2, 2), Matrix::Zero(2, 3), k), ConfigError);
  EXPECT_THROW(mmd2_biased(col({0.0}), col({1.0}), KernelConfig::fixed({})), ConfigError);
  EXPECT_THROW(mmd2_biased(col({0.0}), col({1.0}), KernelConfig::fixed({-1.0})), ConfigError);
}

TEST(Mmd2Unbiased, HandComputed) {
  const auto k = KernelConfig::fixed({1.0});
  const Matrix a = col({0.0, 1.0});
  EXPECT_NEAR(mmd2_unbiased(a, a, k), std::exp(-0.5) - 1.0, 1e-12);
  EXPECT_NEAR(mmd2_unbiased(a, a, k), -0.393469, 1e-6);
  EXPECT_THROW(mmd2_unbiased(col({0.0}), a, k), ConfigError);
}

TEST(Mmd2, MatchesDoubleLoopOracle) {
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    Rng rng(derive_seed(99, trial));
    const Index m = 2 + static_cast<Index>(rng.below(15)), n = 2 + static_cast<Index>(rng.below(15));
    const Index d = 1 + static_cast<Index>(rng.below(8));
    const Matrix A = rng.normal_matrix(m, d), B = rng.normal_matrix(n, d).array() + 0.5;
    const double sigma = rng.uniform(0.3, 3.0);
    const auto k = KernelConfig::fixed({sigma});
    const auto ra = reference::rows(A), rb = reference::rows(B);
    EXPECT_NEAR(mmd2_biased(A, B, k), reference::mmd2_biased(ra, rb, sigma), 1e-12) << trial;
    EXPECT_NEAR(mmd2_unbiased(A, B, k), reference::mmd2_unbiased(ra, rb, sigma), 1e-12) << trial;
  }
}

TEST(Mmd2, MedianModeUsesPooledMedian) {
  Rng rng(5);
  const Matrix A = rng.normal_matrix(6, 3), B = rng.normal_matrix(7, 3);
  const double med = median_heuristic(A, B);
  EXPECT_NEAR(mmd2_biased(A, B, KernelConfig::median()),
              reference::mmd2_biased(reference::rows(A), reference::rows(B), med), 1e-12);
  const auto multi = KernelConfig::multi_median();
  double expect = 0.0;
  for (double s : {0.5, 1.0, 2.0}) expect += reference::mmd2_biased(reference::rows(A), reference::rows(B), s * med) / 3.0;
  EXPECT_NEAR(mmd2_biased(A, B, multi), expect, 1e-12);
}

TEST(Mmd2, SymmetricNonnegativeOrderInvariant) {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(derive_seed(17, trial));
    const Matrix A = rng.normal_matrix(5, 2), B = rng.normal_matrix(6, 2);
    for (const auto& k : {KernelConfig::fixed({1.3}), KernelConfig::median()}) {
      const double ab = mmd2_biased(A, B, k);
      EXPECT_GE(ab, 0.0);
      EXPECT_NEAR(ab, mmd2_biased(B, A, k), 1e-14);
      EXPECT_NEAR(ab, mmd2_biased(reversed_rows(A), reversed_rows(B), k), 1e-14);
      EXPECT_NEAR(mmd2_unbiased(A, B, k), mmd2_unbiased(reversed_rows(A), reversed_rows(B), k), 1e-14);
      EXPECT_EQ(mmd2_biased(A, A, k), 0.0);
    }
  }
}

TEST(Pcir, Examples) {
  const auto k = KernelConfig::fixed({1.0});
  EXPECT_EQ(pcir::pcir({{0, col({1.0, 2.0}), 0}}, k), 0.0);
  EXPECT_EQ(pcir::pcir({{0, col({1.0, 2.0}), 0}, {1, col({1.0, 2.0}), 0}}, k), 0.0);
}

TEST(Pcir, SumsUnorderedPairs) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EnvBatch> batches;
    for (int e = 0; e < 4; ++e) batches.push_back({e, Matrix(rng.normal_matrix(5, 3).array() + e), 0});
    const double sigma = 1.7;
    double expect = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < batches.size(); ++i)
      for (std::size_t j = i + 1; j < batches.size(); ++j, ++pairs)
        expect += reference::mmd2_biased(reference::rows(batches[i].reps), reference::rows(batches[j].reps), sigma);
    EXPECT_EQ(pairs, 6);
    const double got = pcir::pcir(batches, KernelConfig::fixed({sigma}));
    EXPECT_NEAR(got, expect, 1e-12);
    EXPECT_GT(got, 0.0);
    batches.resize(3);
    EXPECT_NEAR(pcir::pcir(batches, KernelConfig::fixed({sigma})),
                reference::mmd2_biased(reference::rows(batches[0].reps), reference::rows(batches[1].reps), sigma) +
                    reference::mmd2_biased(reference::rows(batches[0].reps), reference::rows(batches[2].reps), sigma) +
                    reference::mmd2_biased(reference::rows(batches[1].reps), reference::rows(batches[2].reps), sigma),
                1e-12);
  }
}

TEST(Pcir, Errors) {
  const auto k = KernelConfig::fixed({1.0});
  EXPECT_THROW(pcir::pcir({{0, col({1.0}), 0}, {1, col({2.0}), 1}}, k), ConfigError);
  EXPECT_THROW(pcir::pcir({{0, col({1.0}), 0}, {1, Matrix::Zero(1, 2), 0}}, k), ConfigError);
}

TEST(PcirAutodiff, ValueMatchesPlainEstimator) {
  Rng rng(31);
  std::vector<EnvBatch> plain;
  ad::Tape t;
  std::vector<ad::EnvReps> vars;
  for (int e = 0; e < 3; ++e) {
    const Matrix z = rng.normal_matrix(4, 2).array() + 0.3 * e;
    plain.push_back({e, z, 0});
    vars.push_back({e, t.parameter(z), 0});
  }
  for (const auto& k : {KernelConfig::fixed({0.8}), KernelConfig::median(), KernelConfig::multi_median()})
    EXPECT_NEAR(ad::pcir(vars, k).scalar(), pcir::pcir(plain, k), 1e-12);
}

TEST(PcirAutodiff, GradientMatchesFiniteDifferences) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(41, trial));
    const int envs = 2 + static_cast<int>(rng.below(3));
    std::vector<Matrix> reps;
    for (int e = 0; e < envs; ++e) reps.push_back(rng.normal_matrix(2 + static_cast<Index>(rng.below(4)), 3).array() + 0.4 * e);
    const KernelConfig k = trial % 2 == 0 ? KernelConfig::median() : KernelConfig::fixed({rng.uniform(0.5, 2.0)});

    ad::Tape t;
    std::vector<ad::EnvReps> vars;
    for (int e = 0; e < envs; ++e) vars.push_back({e, t.parameter(reps[static_cast<std::size_t>(e)]), 0});
    const ad::Var root = ad::pcir(vars, k);
    t.backward(root);

    // Bandwidths are frozen at the unperturbed values, so the oracle evaluates
    // every pair with the sigmas resolved from the original representations.
    std::vector<std::vector<double>> sigmas;
    for (int a = 0; a < envs; ++a)
      for (int b = a + 1; b < envs; ++b)
        sigmas.push_back(resolve_bandwidths(k, reps[static_cast<std::size_t>(a)], reps[static_cast<std::size_t>(b)]));
    auto oracle = [&](const std::vector<Matrix>& z) {
      double total = 0.0;
      std::size_t p = 0;
      for (int a = 0; a < envs; ++a)
        for (int b = a + 1; b < envs; ++b, ++p)
          for (std::size_t s = 0; s < sigmas[p].size(); ++s)
            total += k.weight(s) * reference::mmd2_biased(reference::rows(z[static_cast<std::size_t>(a)]),
                                                          reference::rows(z[static_cast<std::size_t>(b)]), sigmas[p][s]);
      return total;
    };
    const std::size_t e = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(envs)));
    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(reps[e].rows())));
    const Index j = static_cast<Index>(rng.below(3));
    const double fd = reference::central_difference(
        [&](const Matrix& m) {
          auto z = reps;
          z[e] = m;
          return oracle(z);
        },
        reps[e], i, j);
    EXPECT_LT(reference::rel_error(vars[e].reps.grad()(i, j), fd), 1e-4) << "trial " << trial;
  }
}

TEST(PcirAutodiff, SingleEnvironmentIsZero) {
  ad::Tape t;
  const ad::Var z = t.parameter(col({1.0, 2.0}));
  EXPECT_EQ(ad::pcir({{0, z, 0}}, KernelConfig::median()).scalar(), 0.0);
}
