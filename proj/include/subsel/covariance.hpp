#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "subsel/errors.hpp"
#include "subsel/subset.hpp"

namespace subsel {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kPsdTolerance = 1e-9;
inline constexpr double kTieTolerance = 1e-9;
inline constexpr double kSingularTolerance = 1e-12;

inline std::vector<int> to_indices(const Subset& s) {
  return {s.members().begin(), s.members().end()};
}

/// Symmetric positive semi-definite K x K matrix with a strictly positive
/// diagonal. Only `validate` constructs one, so every instance satisfies the
/// invariants.
template <typename Scalar = double>
class CovarianceMatrix {
 public:
  using MatrixType = Matrix<Scalar>;

  int dim() const { return static_cast<int>(entries_.rows()); }
  const MatrixType& entries() const { return entries_; }
  Scalar operator()(int i, int j) const { return entries_(i, j); }
  Scalar variance(int i) const { return entries_(i, i); }
  Scalar sd(int i) const { return std::sqrt(entries_(i, i)); }
  Scalar correlation(int i, int j) const {
    return entries_(i, j) / std::sqrt(entries_(i, i) * entries_(j, j));
  }

  /// Sigma restricted to rows `rows` and columns `cols`.
  MatrixType block(const std::vector<int>& rows, const std::vector<int>& cols) const {
    return entries_(rows, cols);
  }

  template <typename S>
  friend CovarianceMatrix<S> validate(Matrix<S> entries);

 private:
  explicit CovarianceMatrix(MatrixType entries) : entries_(std::move(entries)) {}
  MatrixType entries_;
};

/// Returns the matrix wrapped as a CovarianceMatrix iff it is square, exactly
/// symmetric, has a strictly positive diagonal and smallest eigenvalue
/// >= -kPsdTolerance.
template <typename Scalar>
CovarianceMatrix<Scalar> validate(Matrix<Scalar> entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0)
    throw DimensionMismatch("covariance matrix must be square and non-empty, got " +
                            std::to_string(entries.rows()) + "x" + std::to_string(entries.cols()));
  const int K = static_cast<int>(entries.rows());
  for (int i = 0; i < K; ++i) {
    if (!std::isfinite(static_cast<double>(entries(i, i))) || !(entries(i, i) > Scalar(0)))
      throw NonPositiveDiagonal(i);
    for (int j = i + 1; j < K; ++j)
      if (!(entries(i, j) == entries(j, i))) throw AsymmetricMatrix(i, j);
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(entries, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw EigenFailure();
  const Scalar lmin = es.eigenvalues()(0);
  if (lmin < Scalar(-kPsdTolerance)) throw NotPositiveSemiDefinite(static_cast<double>(lmin));
  return CovarianceMatrix<Scalar>(std::move(entries));
}

namespace detail {

template <typename Scalar>
void check_dims(const CovarianceMatrix<Scalar>& sigma, const Subset& A) {
  if (A.dim_total() != sigma.dim())
    throw DimensionMismatch("subset " + A.to_string() + " is over [" +
                            std::to_string(A.dim_total()) + "] but the matrix has dimension " +
                            std::to_string(sigma.dim()));
}

}  // namespace detail

/// psi(A) = Tr(S_A'A' - S_A'A S_AA^-1 S_AA'), evaluated through the
/// eigendecomposition of S_AA. Clamped at zero.
template <typename Scalar>
Scalar true_mse_trace(const CovarianceMatrix<Scalar>& sigma, const Subset& A) {
  detail::check_dims(sigma, A);
  if (A.size() == sigma.dim()) return Scalar(0);
  const auto a = to_indices(A);
  const auto b = A.complement();
  const Matrix<Scalar> saa = sigma.block(a, a);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(saa);
  if (es.info() != Eigen::Success) throw EigenFailure();
  const auto& lambda = es.eigenvalues();
  if (lambda(0) <= Scalar(kSingularTolerance) * std::max(Scalar(1), lambda(lambda.size() - 1)))
    throw SingularSubmatrix("Sigma_AA is singular for A = " + A.to_string());
  // Rows of W are v_i^T S_AA'.
  const Matrix<Scalar> w = es.eigenvectors().transpose() * sigma.block(a, b);
  Scalar explained(0);
  for (Eigen::Index i = 0; i < w.rows(); ++i) explained += w.row(i).squaredNorm() / lambda(i);
  return std::max(Scalar(0), sigma.block(b, b).trace() - explained);
}

/// psi(A) = sum_j [sigma_j^2 - C_j S_AA^-1 C_j^T] with C_j the covariances of
/// arm j with the members of A, evaluated through a Cholesky factor of S_AA.
template <typename Scalar>
Scalar true_mse_expanded(const CovarianceMatrix<Scalar>& sigma, const Subset& A) {
  detail::check_dims(sigma, A);
  const int K = sigma.dim();
  if (A.size() == K) return Scalar(0);
  const auto a = to_indices(A);
  const Matrix<Scalar> saa = sigma.block(a, a);
  Eigen::LLT<Matrix<Scalar>> llt(saa);
  if (llt.info() != Eigen::Success || llt.rcond() <= Scalar(kSingularTolerance))
    throw SingularSubmatrix("Sigma_AA is singular for A = " + A.to_string());
  // Column j of Y is L^-1 C_j^T, so C_j S_AA^-1 C_j^T = |Y_j|^2.
  const Matrix<Scalar> y = llt.matrixL().solve(Matrix<Scalar>(sigma.entries()(a, Eigen::all)));
  Scalar total(0);
  for (int j = 0; j < K; ++j) total += sigma.variance(j) - y.col(j).squaredNorm();
  return std::max(Scalar(0), total);
}

/// Exact MSEs of every m-subset, indexed by Subset::rank().
template <typename Scalar = double>
struct ProblemInstance {
  CovarianceMatrix<Scalar> sigma;
  int m = 0;
  std::vector<Scalar> true_mse;
  /// true_mse - min, forced to exactly 0 on the optimal set.
  std::vector<Scalar> gaps;
  /// Ranks of every subset within kTieTolerance of the minimum, ascending.
  std::vector<std::uint64_t> optimal_set;
  Scalar min_mse{};

  int K() const { return sigma.dim(); }
  std::size_t subset_count() const { return true_mse.size(); }
  Scalar mse(const Subset& A) const { return true_mse[A.rank()]; }
  Scalar gap(const Subset& A) const { return gaps[A.rank()]; }
  bool is_optimal(std::uint64_t rank) const {
    return std::binary_search(optimal_set.begin(), optimal_set.end(), rank);
  }
  bool is_optimal(const Subset& A) const { return is_optimal(A.rank()); }
  /// Smallest strictly positive gap; 0 when every subset is optimal.
  Scalar smallest_gap() const {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Scalar g : gaps)
      if (g > Scalar(0)) best = std::min(best, g);
    return std::isinf(static_cast<double>(best)) ? Scalar(0) : best;
  }
};

/// Evaluates psi on all C(K, m) subsets. Work is split across `threads`
/// workers by rank range; the result does not depend on the split.
template <typename Scalar>
ProblemInstance<Scalar> ground_truth(const CovarianceMatrix<Scalar>& sigma, int m,
                                     unsigned threads = 1) {
  const int K = sigma.dim();
  if (m < 1 || m > K) throw InvalidCardinality(K, m);
  const std::uint64_t count = binomial(K, m);
  std::vector<Scalar> mse(count);

  auto work = [&](std::uint64_t begin, std::uint64_t end, std::exception_ptr& err) {
    try {
      if (begin >= end) return;
      Subset s = subset_from_rank(K, m, begin);
      std::vector<int> c(s.members().begin(), s.members().end());
      for (std::uint64_t r = begin; r < end; ++r) {
        mse[r] = true_mse_trace(sigma, Subset(c, K));
        int i = m - 1;
        while (i >= 0 && c[static_cast<std::size_t>(i)] == K - m + i) --i;
        if (i < 0) break;
        ++c[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < m; ++j)
          c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
      }
    } catch (...) {
      err = std::current_exception();
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::exception_ptr> errors(threads);
  if (threads == 1) {
    work(0, count, errors[0]);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(work, t * chunk, std::min(count, (t + 1) * chunk), std::ref(errors[t]));
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ProblemInstance<Scalar> inst{sigma, m, std::move(mse), {}, {}, {}};
  inst.min_mse = *std::min_element(inst.true_mse.begin(), inst.true_mse.end());
  inst.gaps.resize(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    if (inst.true_mse[r] <= inst.min_mse + Scalar(kTieTolerance)) {
      inst.optimal_set.push_back(r);
      inst.gaps[r] = Scalar(0);
    } else {
      inst.gaps[r] = inst.true_mse[r] - inst.min_mse;
    }
  }
  return inst;
}

enum class Benchmark { Sigma1, Sigma2, Sigma3 };

/// The 20-arm benchmark matrices: a 4x4 correlated head block followed by a
/// `tail_dim` block that is the identity (Sigma1, Sigma3) or tridiagonal with
/// 0.2 off the diagonal (Sigma2). `tail_dim` < 16 gives smaller analogues.
template <typename Scalar = double>
CovarianceMatrix<Scalar> benchmark_sigma(Benchmark which, int tail_dim = 16) {
  if (tail_dim < 1) throw ConfigError("benchmark tail block must have at least one arm");
  Matrix<Scalar> head(4, 4);
  if (which == Benchmark::Sigma3) {
    head << 1, 0.5, 0.45, 0.5,  //
        0.5, 1, 0.45, 0.4,      //
        0.45, 0.45, 1, 0.4,     //
        0.5, 0.4, 0.4, 1;
  } else {
    head << 1, 0.9, 0.9, 0.9,  //
        0.9, 1, 0.85, 0.85,    //
        0.9, 0.85, 1, 0.85,    //
        0.9, 0.85, 0.85, 1;
  }
  const int K = 4 + tail_dim;
  Matrix<Scalar> s = Matrix<Scalar>::Zero(K, K);
  s.topLeftCorner(4, 4) = head;
  s.bottomRightCorner(tail_dim, tail_dim).setIdentity();
  if (which == Benchmark::Sigma2) {
    for (int i = 4; i + 1 < K; ++i) s(i, i + 1) = s(i + 1, i) = Scalar(0.2);
  }
  return validate<Scalar>(std::move(s));
}

/// The hard-instance pattern: unit diagonal, entry (i, j) = rho^(min(i, j) + 1)
/// off the diagonal (0-based). Not validated; see lower_bound_instance.
template <typename Scalar = double>
Matrix<Scalar> lower_bound_pattern(int K, Scalar rho) {
  if (K < 3) throw ConfigError("hard instance needs K >= 3");
  if (!(rho >= Scalar(0) && rho < Scalar(1))) throw ConfigError("hard instance needs rho in [0, 1)");
  Matrix<Scalar> s = Matrix<Scalar>::Identity(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) s(i, j) = s(j, i) = std::pow(rho, Scalar(i + 1));
  return s;
}

/// lower_bound_pattern, validated. Throws NotPositiveSemiDefinite for the
/// (K, rho) combinations where the pattern is indefinite.
template <typename Scalar = double>
CovarianceMatrix<Scalar> lower_bound_instance(int K, Scalar rho) {
  return validate<Scalar>(lower_bound_pattern<Scalar>(K, rho));
}

// Plain-text matrix format: first line K, then K rows of K reals.
Matrix<double> read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const Matrix<double>& m);

/// Accepts "sigma1", "sigma2", "sigma3" or a path to a matrix file.
CovarianceMatrix<double> load_covariance(const std::string& name_or_path);
/// Parses a benchmark name; throws ConfigError for anything else.
Benchmark parse_benchmark(const std::string& name);
std::string benchmark_name(Benchmark which);

}  // namespace subsel
