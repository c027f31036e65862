#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "subsel/covariance.hpp"

namespace subsel {

/// KL(N(0, a0) || N(0, a1)) = 1/2 [tr(a1^-1 a0) - k + ln(det a1 / det a0)].
template <typename D0, typename D1>
typename D0::Scalar gaussian_kl(const Eigen::MatrixBase<D0>& a0, const Eigen::MatrixBase<D1>& a1) {
  using Scalar = typename D0::Scalar;
  if (a0.rows() != a0.cols() || a1.rows() != a1.cols() || a0.rows() != a1.rows())
    throw DimensionMismatch("KL needs two square matrices of the same size");
  const Matrix<Scalar> m0 = a0;
  const Matrix<Scalar> m1 = a1;
  Eigen::LLT<Matrix<Scalar>> l0(m0), l1(m1);
  if (l0.info() != Eigen::Success) throw SingularCovariance("first covariance is not positive definite");
  if (l1.info() != Eigen::Success) throw SingularCovariance("second covariance is not positive definite");
  const auto k = static_cast<Scalar>(m0.rows());
  const Scalar log_det0 = Scalar(2) * l0.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Scalar log_det1 = Scalar(2) * l1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Scalar tr = l1.solve(m0).trace();
  return std::max(Scalar(0), Scalar(0.5) * (tr - k + log_det1 - log_det0));
}

/// The pattern with rows and columns `swap_row` and `target_row` exchanged.
/// Indices are 0-based: swap_row in {0, 1}, target_row in {2, ..., K-1}.
template <typename Scalar = double>
struct TransformedInstance {
  Scalar base_rho;
  int K;
  int swap_row;
  int target_row;
  Matrix<Scalar> matrix;
};

template <typename Scalar = double>
TransformedInstance<Scalar> transform_instance(int K, Scalar rho, int swap_row, int target_row) {
  if (swap_row != 0 && swap_row != 1) throw ConfigError("swap row must be 0 or 1");
  if (target_row < 2 || target_row >= K) throw ConfigError("target row must lie in [2, K)");
  Matrix<Scalar> m = lower_bound_pattern<Scalar>(K, rho);
  m.row(swap_row).swap(m.row(target_row));
  m.col(swap_row).swap(m.col(target_row));
  return {rho, K, swap_row, target_row, std::move(m)};
}

/// Every transform with swap_row in {0, 1} and target_row in [2, K).
template <typename Scalar = double>
std::vector<TransformedInstance<Scalar>> alternative_instances(int K, Scalar rho) {
  std::vector<TransformedInstance<Scalar>> out;
  for (int k = 0; k < 2; ++k)
    for (int t = 2; t < K; ++t) out.push_back(transform_instance<Scalar>(K, rho, k, t));
  return out;
}

/// Symmetric K x K table of pairwise marginal KLs between the base pattern
/// and the transform; the diagonal is 0.
template <typename Scalar>
Matrix<Scalar> kl_table(const TransformedInstance<Scalar>& tr) {
  const Matrix<Scalar> base = lower_bound_pattern<Scalar>(tr.K, tr.base_rho);
  Matrix<Scalar> table = Matrix<Scalar>::Zero(tr.K, tr.K);
  for (int i = 0; i < tr.K; ++i)
    for (int j = i + 1; j < tr.K; ++j) {
      const std::vector<int> idx{i, j};
      table(i, j) = table(j, i) = gaussian_kl(base(idx, idx), tr.matrix(idx, idx));
    }
  return table;
}

/// Closed-form upper bound on table(i, j). Pairs the relabeling leaves
/// alone, and the swapped pair itself, get 0. Returns nothing for the pairs
/// (0, j) and (target, 0) when swap_row = 1, which carry no stated bound.
template <typename Scalar>
std::optional<Scalar> kl_upper_bound(const TransformedInstance<Scalar>& tr, int i, int j) {
  if (i == j) return Scalar(0);
  const int s = tr.swap_row;
  const int t = tr.target_row;
  const bool touches_s = i == s || j == s;
  const bool touches_t = i == t || j == t;
  if (!touches_s && !touches_t) return Scalar(0);
  if (touches_s && touches_t) return Scalar(0);
  const int other = touches_s ? (i == s ? j : i) : (i == t ? j : i);
  const Scalar rho = tr.base_rho;
  // 1-based labels of the bound.
  const int mm = t + 1;
  const int jj = other + 1;
  const int lo = std::min(jj, mm);
  if (s == 0) {
    const Scalar pre = rho * rho / Scalar(2) / (Scalar(1) - rho * rho);
    return touches_s ? pre * (Scalar(1) - std::pow(rho, 2 * (lo - 1)))
                     : pre * (Scalar(1) - std::pow(rho, lo - 1));
  }
  if (other == 0) return std::nullopt;
  const Scalar r4 = std::pow(rho, 4);
  const Scalar pre = r4 / Scalar(2) / (Scalar(1) - r4);
  return touches_s ? pre * (Scalar(1) - std::pow(rho, 2 * (lo - 2)))
                   : pre * (Scalar(1) - std::pow(rho, lo - 2));
}

/// Closed-form gap between the pairs {1,2} and {0,1}:
/// [(K-3)(r^2 + 3r^4 + 2r^6 - 2r^7) + (2r^4 + 3r^6 - r^2)] / (1 - r^4).
template <typename Scalar>
Scalar instance_gap(int K, Scalar rho) {
  if (K < 3) throw InvalidCardinality(K, 2);
  if (!(rho > Scalar(0) && rho < Scalar(1))) throw ConfigError("rho must lie in (0, 1)");
  const Scalar r2 = rho * rho, r4 = r2 * r2, r6 = r4 * r2, r7 = r6 * rho;
  return (static_cast<Scalar>(K - 3) * (r2 + 3 * r4 + 2 * r6 - 2 * r7) + (2 * r4 + 3 * r6 - r2)) /
         (Scalar(1) - r4);
}

/// psi({1,2}) - psi({0,1}) on the validated instance.
template <typename Scalar>
Scalar brute_force_gap(int K, Scalar rho) {
  const auto sigma = lower_bound_instance<Scalar>(K, rho);
  return true_mse_trace(sigma, Subset({1, 2}, K)) - true_mse_trace(sigma, Subset({0, 1}, K));
}

/// rho^4 / (4 (1 + rho^2)).
template <typename Scalar>
Scalar gap_floor(Scalar rho) {
  return std::pow(rho, 4) / (Scalar(4) * (Scalar(1) + rho * rho));
}

/// max(0, log(1 / (2.4 delta)) / gap).
template <typename Scalar>
Scalar lower_bound_value(Scalar delta, Scalar gap) {
  if (!(delta > Scalar(0) && delta < Scalar(1))) throw ConfigError("delta must lie in (0, 1)");
  if (!(gap >= Scalar(1e-12))) throw ZeroGap();
  return std::max(Scalar(0), std::log(Scalar(1) / (Scalar(2.4) * delta)) / gap);
}

/// min over the alternatives of sum_{i<j} w_ij KL_ij, with `weights` a
/// symmetric K x K matrix whose upper triangle sums to 1.
template <typename Scalar>
Scalar maxmin_objective(int K, Scalar rho, const Matrix<Scalar>& weights, bool use_bounds = false) {
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (const auto& tr : alternative_instances<Scalar>(K, rho)) {
    const Matrix<Scalar> kl = use_bounds ? Matrix<Scalar>::Zero(K, K) : kl_table(tr);
    Scalar f(0);
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j) {
        if (weights(i, j) == Scalar(0)) continue;
        Scalar v = kl(i, j);
        if (use_bounds) {
          const auto b = kl_upper_bound(tr, i, j);
          v = b ? *b : std::numeric_limits<Scalar>::infinity();
        }
        f += weights(i, j) * v;
      }
    best = std::min(best, f);
  }
  return best;
}

/// Uniform weight on the pairs (1, j), j >= 3 (0-based), and the value
/// rho^4 / (2 (1 + rho^2)) those weights are said to attain.
template <typename Scalar>
struct MaxMinCheck {
  Matrix<Scalar> weights;
  Scalar claimed;
  Scalar exact;
  Scalar from_bounds;
};

template <typename Scalar>
MaxMinCheck<Scalar> maxmin_check(int K, Scalar rho) {
  if (K < 4) throw InvalidCardinality(K, 2);
  Matrix<Scalar> w = Matrix<Scalar>::Zero(K, K);
  const Scalar each = Scalar(1) / static_cast<Scalar>(K - 3);
  for (int j = 3; j < K; ++j) w(1, j) = w(j, 1) = each;
  return {w, std::pow(rho, 4) / (Scalar(2) * (Scalar(1) + rho * rho)),
          maxmin_objective(K, rho, w, false), maxmin_objective(K, rho, w, true)};
}

}  // namespace subsel
