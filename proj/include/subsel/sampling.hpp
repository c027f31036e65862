#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <random>
#include <unordered_map>

#include "subsel/covariance.hpp"

namespace subsel {

/// (seed, stream_id) names one independent random stream. Replication r of an
/// experiment uses stream_id = r, so parallel replications never share state.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

using Rng = std::mt19937_64;

/// Engine for a stream. The four 32-bit words of (seed, stream_id) go through
/// std::seed_seq, whose output is fixed by the standard.
Rng make_rng(RngSeed seed);

/// Uniform on the open interval (0, 1) with 53 random bits.
double uniform_open(Rng& rng);

/// Standard normal quantile (Wichura's AS 241, relative accuracy ~1e-16).
double normal_quantile(double p);

/// Standard normal by inversion: normal_quantile(uniform_open(rng)). One
/// engine draw per variate.
double standard_normal(Rng& rng);

/// Lower-triangular L with L L^T = Sigma + regularization * I.
struct Factor {
  Matrix<double> lower;
  /// 0, or 1e-12 when plain Cholesky failed on a rank-deficient matrix.
  double regularization = 0.0;
};

/// Cholesky factor; retries once with 1e-12 * I added, then throws
/// FactorizationFailed.
Factor factorize(const Matrix<double>& sigma);
inline Factor factorize(const CovarianceMatrix<double>& sigma) { return factorize(sigma.entries()); }

/// One draw L z with z i.i.d. standard normal, z drawn in coordinate order.
Vector<double> draw_full(const Factor& factor, Rng& rng);
/// n draws stacked as rows of an n x K matrix.
Matrix<double> draw_batch(const Factor& factor, int n, Rng& rng);

struct SubsetObservation {
  Subset subset;
  /// One value per member of `subset`, in member order.
  Vector<double> values;
};

/// Bounded LRU cache of factors of Sigma_AA keyed by subset. All operations
/// are serialised by an internal mutex.
class FactorCache {
 public:
  explicit FactorCache(std::size_t capacity = 20000) : capacity_(capacity) {}

  std::shared_ptr<const Factor> get(const CovarianceMatrix<double>& sigma, const Subset& A);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  using Entry = std::pair<Subset, std::shared_ptr<const Factor>>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> lru_;
  std::unordered_map<Subset, std::list<Entry>::iterator> index_;
};

/// A draw from N(0, Sigma_AA).
SubsetObservation draw_subset(const CovarianceMatrix<double>& sigma, const Subset& A, Rng& rng,
                              FactorCache& cache);

/// Bundles a covariance matrix with its full factor and a subset-factor cache.
class GaussianSampler {
 public:
  explicit GaussianSampler(CovarianceMatrix<double> sigma, std::size_t cache_capacity = 20000);

  const CovarianceMatrix<double>& sigma() const { return sigma_; }
  const Factor& full_factor() const { return full_; }
  int dim() const { return sigma_.dim(); }

  Vector<double> draw_full(Rng& rng) const { return subsel::draw_full(full_, rng); }
  Matrix<double> draw_batch(int n, Rng& rng) const { return subsel::draw_batch(full_, n, rng); }
  SubsetObservation draw_subset(const Subset& A, Rng& rng) const {
    return subsel::draw_subset(sigma_, A, rng, cache_);
  }
  std::shared_ptr<const Factor> subset_factor(const Subset& A) const { return cache_.get(sigma_, A); }
  FactorCache& cache() const { return cache_; }

 private:
  CovarianceMatrix<double> sigma_;
  Factor full_;
  mutable FactorCache cache_;
};

}  // namespace subsel
