#pragma once

#include "subsel/covariance.hpp"
#include "subsel/sampling.hpp"

namespace subsel::test {

/// B B^T / K + 0.05 I for a Gaussian B; always positive definite.
inline Matrix<double> random_pd(int K, Rng& rng) {
  Matrix<double> b(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) b(i, j) = standard_normal(rng);
  Matrix<double> s = b * b.transpose() / K;
  s.diagonal().array() += 0.05;
  return 0.5 * (s + s.transpose());
}

inline Subset random_subset(int K, int m, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) all[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i) {
    const auto j = i + static_cast<int>(uniform_open(rng) * (K - i));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(std::min(j, K - 1))]);
  }
  return Subset(std::vector<int>(all.begin(), all.begin() + m), K);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::min(hi, lo + static_cast<int>(uniform_open(rng) * (hi - lo + 1)));
}

}  // namespace subsel::test
