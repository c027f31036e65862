#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "subsel/sampling.hpp"

using namespace subsel;

namespace {
double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
}  // namespace

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-14);
  EXPECT_NEAR(normal_quantile(0.3), -0.5244005127080409, 1e-14);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-12);
  EXPECT_EQ(normal_quantile(0.5), 0.0);
}

TEST(NormalQuantile, InvertsTheCdf) {
  for (double p = 1e-6; p < 1.0; p += 0.0137) EXPECT_NEAR(phi(normal_quantile(p)), p, 1e-14 + 1e-12 * p);
  for (double p : {0.01, 0.2, 0.4}) EXPECT_NEAR(normal_quantile(p), -normal_quantile(1 - p), 1e-14);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_rng({7, 3}), b = make_rng({7, 3}), c = make_rng({7, 4}), d = make_rng({8, 3});
  for (int i = 0; i < 100; ++i) {
    const double x = standard_normal(a);
    EXPECT_EQ(x, standard_normal(b));
    EXPECT_NE(x, standard_normal(c));
    EXPECT_NE(x, standard_normal(d));
  }
}

TEST(Rng, UniformStaysInsideOpenInterval) {
  Rng r = make_rng({1, 1});
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform_open(r);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Sampling, BatchCovarianceConverges) {
  Rng rng = make_rng({21, 0});
  const auto sigma = validate(test::random_pd(5, rng));
  const Factor f = factorize(sigma);
  const Matrix<double> x = draw_batch(f, 200000, rng);
  const Matrix<double> s = x.transpose() * x / 200000.0;
  EXPECT_LT((s - sigma.entries()).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT(x.colwise().mean().cwiseAbs().maxCoeff(), 0.01);
}

TEST(Sampling, BatchMatchesSequentialDraws) {
  const auto sigma = benchmark_sigma(Benchmark::Sigma3, 2);
  const Factor f = factorize(sigma);
  Rng a = make_rng({5, 5}), b = make_rng({5, 5});
  const Matrix<double> x = draw_batch(f, 10, a);
  for (int i = 0; i < 10; ++i) EXPECT_LT((x.row(i).transpose() - draw_full(f, b)).norm(), 1e-12);
}

TEST(Sampling, SubsetObservationsHaveTheMarginal) {
  const auto sigma = benchmark_sigma(Benchmark::Sigma1, 2);
  GaussianSampler sampler(sigma);
  const Subset A({0, 2, 5}, 6);
  Rng rng = make_rng({22, 0});
  Matrix<double> acc = Matrix<double>::Zero(3, 3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto obs = sampler.draw_subset(A, rng);
    ASSERT_EQ(obs.subset, A);
    acc += obs.values * obs.values.transpose();
  }
  acc /= n;
  const std::vector<int> idx{0, 2, 5};
  EXPECT_LT((acc - sigma.entries()(idx, idx)).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Sampling, FactorCacheIsBoundedAndShared) {
  const auto sigma = benchmark_sigma(Benchmark::Sigma1, 4);
  FactorCache cache(3);
  const auto f1 = cache.get(sigma, Subset({0, 1}, 8));
  EXPECT_EQ(cache.get(sigma, Subset({0, 1}, 8)), f1);
  for (int j = 2; j < 8; ++j) cache.get(sigma, Subset({0, j}, 8));
  EXPECT_EQ(cache.size(), 3u);
  EXPECT_NE(cache.get(sigma, Subset({0, 1}, 8)), f1);
}

TEST(Sampling, FactorizeRegularisesSemidefinite) {
  Matrix<double> s(2, 2);
  s << 1, 1, 1, 1;
  const Factor f = factorize(s);
  EXPECT_GT(f.regularization, 0.0);
  Matrix<double> bad(2, 2);
  bad << 1, 3, 3, 1;
  EXPECT_THROW(factorize(bad), FactorizationFailed);
}
