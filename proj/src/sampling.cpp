#include "subsel/sampling.hpp"

#include <cmath>

namespace subsel {

Rng make_rng(RngSeed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.seed), static_cast<std::uint32_t>(seed.seed >> 32),
                    static_cast<std::uint32_t>(seed.stream_id),
                    static_cast<std::uint32_t>(seed.stream_id >> 32)};
  return Rng(seq);
}

double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

double standard_normal(Rng& rng) { return normal_quantile(uniform_open(rng)); }

Factor factorize(const Matrix<double>& sigma) {
  Eigen::LLT<Matrix<double>> llt(sigma);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
  constexpr double kJitter = 1e-12;
  const Matrix<double> perturbed =
      sigma + kJitter * Matrix<double>::Identity(sigma.rows(), sigma.cols());
  llt.compute(perturbed);
  if (llt.info() != Eigen::Success)
    throw FactorizationFailed("Cholesky factorization failed even with 1e-12 regularization");
  return {llt.matrixL(), kJitter};
}

Vector<double> draw_full(const Factor& factor, Rng& rng) {
  const Eigen::Index K = factor.lower.rows();
  Vector<double> z(K);
  for (Eigen::Index i = 0; i < K; ++i) z(i) = standard_normal(rng);
  return factor.lower.triangularView<Eigen::Lower>() * z;
}

Matrix<double> draw_batch(const Factor& factor, int n, Rng& rng) {
  const Eigen::Index K = factor.lower.rows();
  Matrix<double> z(n, K);
  for (int r = 0; r < n; ++r)
    for (Eigen::Index i = 0; i < K; ++i) z(r, i) = standard_normal(rng);
  // Row r is (L z_r)^T = z_r^T L^T.
  return z * factor.lower.transpose().triangularView<Eigen::Upper>();
}

std::shared_ptr<const Factor> FactorCache::get(const CovarianceMatrix<double>& sigma,
                                               const Subset& A) {
  {
    std::lock_guard lock(mu_);
    if (auto it = index_.find(A); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
  }
  const auto a = to_indices(A);
  auto factor = std::make_shared<const Factor>(factorize(sigma.block(a, a)));
  std::lock_guard lock(mu_);
  if (auto it = index_.find(A); it != index_.end()) return it->second->second;
  lru_.emplace_front(A, factor);
  index_.emplace(A, lru_.begin());
  while (lru_.size() > capacity_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return factor;
}

std::size_t FactorCache::size() const {
  std::lock_guard lock(mu_);
  return lru_.size();
}

SubsetObservation draw_subset(const CovarianceMatrix<double>& sigma, const Subset& A, Rng& rng,
                              FactorCache& cache) {
  const auto factor = cache.get(sigma, A);
  return {A, draw_full(*factor, rng)};
}

GaussianSampler::GaussianSampler(CovarianceMatrix<double> sigma, std::size_t cache_capacity)
    : sigma_(std::move(sigma)), full_(factorize(sigma_)), cache_(cache_capacity) {}

}  // namespace subsel
