#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "subsel/covariance.hpp"
#include "subsel/sampling.hpp"

namespace subsel {

// ---------------------------------------------------------------------------
// Entry-wise sample statistics shared across subsets.
// ---------------------------------------------------------------------------

/// Per-arm and per-pair counters and running sums of a mean-zero Gaussian.
/// Arm counts n_i and pair counts n_ij are kept separately: an observation of
/// subset A bumps n_i for every i in A and n_ij for every unordered pair in A.
class SampleLedger {
 public:
  using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit SampleLedger(int K);

  int dim() const { return K_; }

  void update(const SubsetObservation& obs) { update(obs.subset.members(), obs.values); }
  void update(std::span<const int> arms, const Vector<double>& values);
  /// Observation of the whole vector.
  void update_full(const Vector<double>& x);

  std::int64_t count(int i) const { return n_[static_cast<std::size_t>(i)]; }
  std::int64_t pair_count(int i, int j) const { return n_pair_(i, j); }
  double sum_squares(int i) const { return sumsq_[static_cast<std::size_t>(i)]; }
  double sum_products(int i, int j) const { return sumprod_(i, j); }

  /// sum X_i^2 / n_i (no centering). Throws InsufficientCoverage when n_i = 0.
  double sample_variance(int i) const;
  /// (sum X_i X_j / n_ij) / (sd_i sd_j), clamped to [-1, 1]; 1 when i == j.
  double sample_correlation(int i, int j) const;

  /// S with S_ii = sample variance and S_ij = rho_ij sd_i sd_j. Entries whose
  /// counts are zero, or that involve a zero-variance arm, are NaN.
  Matrix<double> entrywise_covariance() const;

  /// JSON snapshot with every count and sum at full precision.
  void write_snapshot(std::ostream& out) const;
  static SampleLedger read_snapshot(std::istream& in);

  friend bool operator==(const SampleLedger& a, const SampleLedger& b) {
    return a.K_ == b.K_ && a.n_ == b.n_ && a.sumsq_ == b.sumsq_ && a.n_pair_ == b.n_pair_ &&
           a.sumprod_ == b.sumprod_;
  }

 private:
  int K_;
  std::vector<std::int64_t> n_;
  std::vector<double> sumsq_;
  CountMatrix n_pair_;
  Matrix<double> sumprod_;
};

inline double sample_correlation(const SampleLedger& ledger, int i, int j) {
  return ledger.sample_correlation(i, j);
}

inline SampleLedger& update_ledger(SampleLedger& ledger, const SubsetObservation& obs) {
  ledger.update(obs);
  return ledger;
}

// ---------------------------------------------------------------------------
// Positive projection.
// ---------------------------------------------------------------------------

/// Eigendecomposition of a symmetric estimate with small eigenvalues lifted.
template <typename Scalar>
struct Projection {
  Matrix<Scalar> eigenvectors;
  Vector<Scalar> raw_eigenvalues;
  /// After lifting: lambda if lambda >= zeta, zeta otherwise.
  Vector<Scalar> eigenvalues;
  int lifted = 0;
  /// Set when an eigenvalue <= -zeta was lifted. The plain |lambda| >= zeta
  /// rule would keep it and leave the result indefinite.
  bool lifted_negative = false;

  bool projected() const { return lifted > 0; }
  Matrix<Scalar> matrix() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
  Matrix<Scalar> inverse() const {
    return eigenvectors * eigenvalues.cwiseInverse().asDiagonal() * eigenvectors.transpose();
  }
};

template <typename Derived>
Projection<typename Derived::Scalar> project_positive(const Eigen::MatrixBase<Derived>& sigma_hat,
                                                      typename Derived::Scalar zeta) {
  using Scalar = typename Derived::Scalar;
  if (!(zeta > Scalar(0))) throw ConfigError("projection parameter zeta must be > 0");
  if (sigma_hat.rows() != sigma_hat.cols()) throw DimensionMismatch("projection needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sigma_hat.eval());
  if (es.info() != Eigen::Success) throw EigenFailure();
  Projection<Scalar> p{es.eigenvectors(), es.eigenvalues(), es.eigenvalues(), 0, false};
  for (Eigen::Index i = 0; i < p.eigenvalues.size(); ++i) {
    const Scalar lambda = p.raw_eigenvalues(i);
    if (lambda >= zeta) continue;
    if (lambda <= -zeta) p.lifted_negative = true;
    p.eigenvalues(i) = zeta;
    ++p.lifted;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Projection parameters.
// ---------------------------------------------------------------------------

/// M0 bounds the operator norms of the diagonal blocks, 1/M1 the norm of
/// Sigma_AA^-1, l the smallest variance; eta = min(2K, lambda_min(Sigma_AA)).
struct RegularityConstants {
  double M0 = 1.0;
  double M1 = 1.0;
  double l = 1.0;
  double eta = 1.0;
};

/// Constants valid for every subset, from a full K x K pilot estimate:
/// l = min diagonal floored at 0.05, eta = lambda_min clamped to [0, 2K],
/// M0 = lambda_max, M1 = lambda_min floored at 1e-12. Eigenvalue interlacing
/// makes the full-matrix extremes bounds for every principal block.
RegularityConstants estimate_regularity(const Matrix<double>& pilot);
/// Same, with the eigenvalue terms taken from the blocks of A and A'.
RegularityConstants estimate_regularity(const Matrix<double>& pilot, const Subset& A);

/// M0 * min(sqrt(x), x) with x = (m + log(1/delta)) / n_AA.
double zeta_nonadaptive(int m, double delta, std::int64_t n_aa, double M0);

/// sqrt((1+eta)^3 (m^2-m) / (n l^2)) sqrt(log(15 (m^2-m) / delta))
///   + sqrt(m log(m/delta) / n). The first term is absent for m = 1.
double zeta_adaptive(int m, double delta, std::int64_t n_double_prime, double l, double eta);

enum class ZetaRule { NonAdaptive, Adaptive, Fixed };

struct ProjectionParams {
  ZetaRule rule = ZetaRule::NonAdaptive;
  double delta = 0.1;
  RegularityConstants reg{};
  /// Used only with ZetaRule::Fixed.
  double fixed_zeta = 0.0;

  /// Throws ConfigError unless delta in (0,1), l in (0,1], M1 > 0 and, for
  /// the fixed rule, fixed_zeta > 0.
  void check() const;
  /// zeta for an m-subset estimated from n samples under the chosen rule.
  double zeta(int m, std::int64_t n) const;
};

template <typename Scalar = double>
struct MseEstimate {
  Subset subset;
  Scalar value{};
  /// n' (non-adaptive) or n'' (adaptive).
  std::int64_t samples_used = 0;
  bool projected = false;
  Scalar zeta{};
};

// ---------------------------------------------------------------------------
// Non-adaptive estimator.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
Matrix<Scalar> second_moment(const Matrix<Scalar>& x, const std::vector<int>& rows_idx,
                             const std::vector<int>& cols_idx) {
  return (x(Eigen::all, rows_idx).transpose() * x(Eigen::all, cols_idx)) /
         static_cast<Scalar>(x.rows());
}

template <typename Scalar>
MseEstimate<Scalar> finish_nonadaptive(const Subset& A, const Matrix<Scalar>& s_aa,
                                       const Matrix<Scalar>& s_bb, const Matrix<Scalar>& s_ba,
                                       const Matrix<Scalar>& s_ab, std::int64_t n_aa,
                                       std::int64_t n_min, const ProjectionParams& params) {
  const Scalar zeta = static_cast<Scalar>(params.zeta(A.size(), n_aa));
  if (s_bb.size() == 0) return {A, Scalar(0), n_min, false, zeta};
  const auto proj = project_positive(s_aa, zeta);
  // Tr(S_A'A (S_AA^+)^-1 S_AA') through the eigenbasis of S_AA^+.
  const Matrix<Scalar> left = s_ba * proj.eigenvectors;
  const Matrix<Scalar> right = proj.eigenvectors.transpose() * s_ab;
  Scalar explained(0);
  for (Eigen::Index i = 0; i < left.cols(); ++i)
    explained += left.col(i).dot(right.row(i)) / proj.eigenvalues(i);
  const Scalar value = std::max(Scalar(0), s_bb.trace() - explained);
  return {A, value, n_min, proj.projected(), zeta};
}

}  // namespace detail

/// psi_hat(A) = Tr(S_A'A' - S_A'A (S_AA^+)^-1 S_AA') with every block from the
/// same n x K batch of mean-zero samples (rows are samples).
template <typename Scalar>
MseEstimate<Scalar> estimate_mse_nonadaptive(const Matrix<Scalar>& samples, const Subset& A,
                                             const ProjectionParams& params) {
  if (samples.rows() < 2) throw DegenerateBatch(static_cast<long>(samples.rows()));
  if (samples.cols() != A.dim_total())
    throw DimensionMismatch("sample batch has " + std::to_string(samples.cols()) +
                            " columns, subset is over [" + std::to_string(A.dim_total()) + "]");
  params.check();
  const auto a = to_indices(A);
  const auto b = A.complement();
  const Matrix<Scalar> s_ab = detail::second_moment(samples, a, b);
  const auto n = static_cast<std::int64_t>(samples.rows());
  return detail::finish_nonadaptive<Scalar>(A, detail::second_moment(samples, a, a),
                                            detail::second_moment(samples, b, b),
                                            s_ab.transpose(), s_ab, n, n, params);
}

/// Separate batches for each block; each batch is n_block x K.
template <typename Scalar>
struct BlockBatches {
  Matrix<Scalar> aa, bb, ba, ab;
};

/// As above, with each of the four blocks estimated from its own batch.
/// samples_used = min of the four batch sizes.
template <typename Scalar>
MseEstimate<Scalar> estimate_mse_nonadaptive(const BlockBatches<Scalar>& batches, const Subset& A,
                                             const ProjectionParams& params) {
  for (const auto* x : {&batches.aa, &batches.bb, &batches.ba, &batches.ab}) {
    if (x->rows() < 2) throw DegenerateBatch(static_cast<long>(x->rows()));
    if (x->cols() != A.dim_total()) throw DimensionMismatch("block batch width does not match K");
  }
  params.check();
  const auto a = to_indices(A);
  const auto b = A.complement();
  const std::int64_t n_min =
      std::min({batches.aa.rows(), batches.bb.rows(), batches.ba.rows(), batches.ab.rows()});
  return detail::finish_nonadaptive<Scalar>(
      A, detail::second_moment(batches.aa, a, a), detail::second_moment(batches.bb, b, b),
      detail::second_moment(batches.ba, b, a), detail::second_moment(batches.ab, a, b),
      static_cast<std::int64_t>(batches.aa.rows()), n_min, params);
}

// ---------------------------------------------------------------------------
// Adaptive estimator.
// ---------------------------------------------------------------------------

/// psi_hat(A) = sum_j [sd_j^2 - C_j (S_AA^+)^-1 C_j^T] with
/// C_j = [rho_{j i_k} sd_{i_k} sd_j]_k, all from the ledger. n'' is the
/// smallest count among every n_j and every n_{j i}, i in A.
MseEstimate<double> estimate_mse_adaptive(const SampleLedger& ledger, const Subset& A,
                                          const ProjectionParams& params);

/// Frozen snapshot of a ledger that evaluates the adaptive estimate of many
/// subsets quickly: with S the entry-wise covariance,
/// psi_hat(A) = Tr(S) - Tr((S_AA^+)^-1 (S S)_AA). Agrees with
/// estimate_mse_adaptive to rounding. The ledger must outlive the evaluator;
/// later updates to it are not seen.
class AdaptiveMseEvaluator {
 public:
  AdaptiveMseEvaluator(const SampleLedger& ledger, ProjectionParams params);

  MseEstimate<double> evaluate(const Subset& A) const;
  /// Hot-path variant; members must be sorted and in range.
  double value(std::span<const int> members, bool* projected = nullptr) const;

  const Matrix<double>& covariance() const { return s_; }

 private:
  std::int64_t n_double_prime(std::span<const int> members) const;

  ProjectionParams params_;
  Matrix<double> s_;
  Matrix<double> s2_;
  double trace_ = 0.0;
  std::int64_t min_arm_count_ = 0;
  std::vector<std::int64_t> min_pair_count_;
  int missing_arm_ = -1;
  const SampleLedger* ledger_;
};

}  // namespace subsel
