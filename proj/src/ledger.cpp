#include <algorithm>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "subsel/estimation.hpp"

namespace subsel {

SampleLedger::SampleLedger(int K)
    : K_(K),
      n_(static_cast<std::size_t>(std::max(K, 0)), 0),
      sumsq_(static_cast<std::size_t>(std::max(K, 0)), 0.0),
      n_pair_(CountMatrix::Zero(K, K)),
      sumprod_(Matrix<double>::Zero(K, K)) {
  if (K < 1) throw ConfigError("ledger dimension must be >= 1");
}

void SampleLedger::update(std::span<const int> arms, const Vector<double>& values) {
  if (static_cast<Eigen::Index>(arms.size()) != values.size())
    throw DimensionMismatch("observation has " + std::to_string(values.size()) + " values for " +
                            std::to_string(arms.size()) + " arms");
  for (int a : arms)
    if (a < 0 || a >= K_) throw DimensionMismatch("arm " + std::to_string(a) + " out of range");
  for (std::size_t p = 0; p < arms.size(); ++p) {
    const int i = arms[p];
    const double xi = values(static_cast<Eigen::Index>(p));
    ++n_[static_cast<std::size_t>(i)];
    sumsq_[static_cast<std::size_t>(i)] += xi * xi;
    for (std::size_t q = p + 1; q < arms.size(); ++q) {
      const int j = arms[q];
      const double prod = xi * values(static_cast<Eigen::Index>(q));
      ++n_pair_(i, j);
      ++n_pair_(j, i);
      sumprod_(i, j) += prod;
      sumprod_(j, i) += prod;
    }
  }
}

void SampleLedger::update_full(const Vector<double>& x) {
  if (x.size() != K_) throw DimensionMismatch("full observation must have K values");
  std::vector<int> arms(static_cast<std::size_t>(K_));
  for (int i = 0; i < K_; ++i) arms[static_cast<std::size_t>(i)] = i;
  update(arms, x);
}

double SampleLedger::sample_variance(int i) const {
  const auto n = count(i);
  if (n == 0) throw InsufficientCoverage(i, -1);
  return sum_squares(i) / static_cast<double>(n);
}

double SampleLedger::sample_correlation(int i, int j) const {
  if (i == j) return 1.0;
  const auto n = pair_count(i, j);
  if (n == 0) throw InsufficientCoverage(i, j);
  const double si = std::sqrt(sample_variance(i));
  const double sj = std::sqrt(sample_variance(j));
  if (si == 0.0) throw ZeroVariance(i);
  if (sj == 0.0) throw ZeroVariance(j);
  const double rho = (sum_products(i, j) / static_cast<double>(n)) / (si * sj);
  return std::clamp(rho, -1.0, 1.0);
}

Matrix<double> SampleLedger::entrywise_covariance() const {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Matrix<double> s = Matrix<double>::Constant(K_, K_, nan);
  Vector<double> sd(K_);
  for (int i = 0; i < K_; ++i) {
    sd(i) = count(i) > 0 ? std::sqrt(sample_variance(i)) : nan;
    if (count(i) > 0) s(i, i) = sd(i) * sd(i);
  }
  for (int i = 0; i < K_; ++i)
    for (int j = i + 1; j < K_; ++j) {
      if (pair_count(i, j) == 0 || !(sd(i) > 0.0) || !(sd(j) > 0.0)) continue;
      const double rho = std::clamp(
          (sum_products(i, j) / static_cast<double>(pair_count(i, j))) / (sd(i) * sd(j)), -1.0,
          1.0);
      s(i, j) = s(j, i) = rho * sd(i) * sd(j);
    }
  return s;
}

void SampleLedger::write_snapshot(std::ostream& out) const {
  nlohmann::json j;
  j["K"] = K_;
  j["counts"] = n_;
  j["sum_squares"] = sumsq_;
  auto pairs = nlohmann::json::array();
  for (int a = 0; a < K_; ++a)
    for (int b = a + 1; b < K_; ++b)
      if (n_pair_(a, b) > 0 || sumprod_(a, b) != 0.0)
        pairs.push_back({a, b, n_pair_(a, b), sumprod_(a, b)});
  j["pairs"] = std::move(pairs);
  out << j.dump() << '\n';
}

SampleLedger SampleLedger::read_snapshot(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ledger snapshot: ") + e.what());
  }
  try {
    SampleLedger ledger(j.at("K").get<int>());
    auto counts = j.at("counts").get<std::vector<std::int64_t>>();
    auto sums = j.at("sum_squares").get<std::vector<double>>();
    if (counts.size() != ledger.n_.size() || sums.size() != ledger.sumsq_.size())
      throw ConfigError("ledger snapshot: arm arrays do not match K");
    ledger.n_ = std::move(counts);
    ledger.sumsq_ = std::move(sums);
    for (const auto& p : j.at("pairs")) {
      const int a = p.at(0).get<int>();
      const int b = p.at(1).get<int>();
      if (a < 0 || b < 0 || a >= ledger.K_ || b >= ledger.K_ || a == b)
        throw ConfigError("ledger snapshot: bad pair index");
      ledger.n_pair_(a, b) = ledger.n_pair_(b, a) = p.at(2).get<std::int64_t>();
      ledger.sumprod_(a, b) = ledger.sumprod_(b, a) = p.at(3).get<double>();
    }
    return ledger;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ledger snapshot: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

struct Extremes {
  double lo, hi;
};

Extremes eigen_extremes(const Matrix<double>& m) {
  if (m.size() == 0) return {std::numeric_limits<double>::infinity(), 0.0};
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw EigenFailure();
  return {es.eigenvalues()(0), es.eigenvalues()(es.eigenvalues().size() - 1)};
}

RegularityConstants assemble(const Matrix<double>& pilot, double lambda_min, double M0) {
  const auto K = static_cast<double>(pilot.rows());
  RegularityConstants r;
  r.l = std::min(1.0, std::max(0.05, pilot.diagonal().minCoeff()));
  r.eta = std::clamp(lambda_min, 0.0, 2.0 * K);
  r.M0 = M0;
  r.M1 = std::max(lambda_min, 1e-12);
  return r;
}

}  // namespace

RegularityConstants estimate_regularity(const Matrix<double>& pilot) {
  if (pilot.rows() != pilot.cols() || pilot.rows() == 0)
    throw DimensionMismatch("pilot covariance must be square");
  const auto e = eigen_extremes(pilot);
  return assemble(pilot, e.lo, e.hi);
}

RegularityConstants estimate_regularity(const Matrix<double>& pilot, const Subset& A) {
  if (pilot.rows() != pilot.cols() || pilot.rows() != A.dim_total())
    throw DimensionMismatch("pilot covariance does not match subset dimension");
  const auto a = to_indices(A);
  const auto b = A.complement();
  const auto ea = eigen_extremes(pilot(a, a));
  const auto eb = eigen_extremes(pilot(b, b));
  return assemble(pilot, ea.lo, std::max(ea.hi, eb.hi));
}

double zeta_nonadaptive(int m, double delta, std::int64_t n_aa, double M0) {
  if (n_aa < 1) throw ConfigError("zeta needs at least one sample");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  const double x = (static_cast<double>(m) + std::log(1.0 / delta)) / static_cast<double>(n_aa);
  return M0 * std::min(std::sqrt(x), x);
}

double zeta_adaptive(int m, double delta, std::int64_t n_double_prime, double l, double eta) {
  if (n_double_prime < 1) throw ConfigError("zeta needs at least one sample");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(l > 0.0)) throw ConfigError("variance floor l must be > 0");
  const double n = static_cast<double>(n_double_prime);
  const double md = static_cast<double>(m);
  const double pairs = md * md - md;
  double z = std::sqrt(md * std::log(md / delta) / n);
  if (pairs > 0.0)
    z += std::sqrt(std::pow(1.0 + eta, 3) * pairs / (n * l * l)) *
         std::sqrt(std::log(15.0 * pairs / delta));
  return z;
}

void ProjectionParams::check() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(reg.l > 0.0 && reg.l <= 1.0)) throw ConfigError("variance floor l must lie in (0, 1]");
  if (!(reg.M1 > 0.0)) throw ConfigError("M1 must be > 0");
  if (!(reg.M0 > 0.0)) throw ConfigError("M0 must be > 0");
  if (!(reg.eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (rule == ZetaRule::Fixed && !(fixed_zeta > 0.0)) throw ConfigError("fixed zeta must be > 0");
}

double ProjectionParams::zeta(int m, std::int64_t n) const {
  switch (rule) {
    case ZetaRule::NonAdaptive:
      return zeta_nonadaptive(m, delta, n, reg.M0);
    case ZetaRule::Adaptive:
      return zeta_adaptive(m, delta, n, reg.l, reg.eta);
    case ZetaRule::Fixed:
      return fixed_zeta;
  }
  throw ConfigError("unknown zeta rule");
}

// ---------------------------------------------------------------------------

namespace {

std::int64_t coverage_count(const SampleLedger& ledger, std::span<const int> members) {
  const int K = ledger.dim();
  std::int64_t n = std::numeric_limits<std::int64_t>::max();
  for (int j = 0; j < K; ++j) {
    if (ledger.count(j) == 0) throw InsufficientCoverage(j, -1);
    if (ledger.sum_squares(j) == 0.0) throw ZeroVariance(j);
    n = std::min(n, ledger.count(j));
  }
  for (int i : members)
    for (int j = 0; j < K; ++j) {
      if (j == i) continue;
      if (ledger.pair_count(j, i) == 0) throw InsufficientCoverage(j, i);
      n = std::min(n, ledger.pair_count(j, i));
    }
  return n;
}

}  // namespace

MseEstimate<double> estimate_mse_adaptive(const SampleLedger& ledger, const Subset& A,
                                          const ProjectionParams& params) {
  if (A.dim_total() != ledger.dim()) throw DimensionMismatch("subset and ledger dimensions differ");
  params.check();
  const int K = ledger.dim();
  const int m = A.size();
  const std::int64_t n2 = coverage_count(ledger, A.members());

  Vector<double> sd(K);
  for (int j = 0; j < K; ++j) sd(j) = std::sqrt(ledger.sample_variance(j));

  Matrix<double> s_aa(m, m);
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q)
      s_aa(p, q) = ledger.sample_correlation(A[p], A[q]) * sd(A[p]) * sd(A[q]);

  const double zeta = params.zeta(m, n2);
  const auto proj = project_positive(s_aa, zeta);
  const Matrix<double> inv = proj.inverse();

  double value = 0.0;
  Vector<double> c(m);
  for (int j = 0; j < K; ++j) {
    for (int p = 0; p < m; ++p)
      c(p) = (A[p] == j ? 1.0 : ledger.sample_correlation(j, A[p])) * sd(A[p]) * sd(j);
    value += sd(j) * sd(j) - c.dot(inv * c);
  }
  return {A, std::max(0.0, value), n2, proj.projected(), zeta};
}

AdaptiveMseEvaluator::AdaptiveMseEvaluator(const SampleLedger& ledger, ProjectionParams params)
    : params_(params),
      s_(ledger.entrywise_covariance()),
      min_pair_count_(static_cast<std::size_t>(ledger.dim())),
      ledger_(&ledger) {
  params_.check();
  const int K = ledger.dim();
  min_arm_count_ = std::numeric_limits<std::int64_t>::max();
  for (int j = 0; j < K; ++j) {
    if (ledger.count(j) == 0 || ledger.sum_squares(j) == 0.0) {
      if (missing_arm_ < 0) missing_arm_ = j;
      continue;
    }
    min_arm_count_ = std::min(min_arm_count_, ledger.count(j));
  }
  for (int i = 0; i < K; ++i) {
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    for (int j = 0; j < K; ++j)
      if (j != i) lo = std::min(lo, ledger.pair_count(j, i));
    min_pair_count_[static_cast<std::size_t>(i)] = lo;
  }
  if (missing_arm_ < 0) {
    // Unobserved pairs leave NaN entries; they only reach subsets whose
    // coverage check fails first.
    s2_ = s_ * s_;
    trace_ = s_.trace();
  }
}

std::int64_t AdaptiveMseEvaluator::n_double_prime(std::span<const int> members) const {
  if (missing_arm_ >= 0) {
    // Reproduce the reference error ordering.
    return coverage_count(*ledger_, members);
  }
  std::int64_t n = min_arm_count_;
  for (int i : members) {
    const auto lo = min_pair_count_[static_cast<std::size_t>(i)];
    if (lo == 0) return coverage_count(*ledger_, members);
    n = std::min(n, lo);
  }
  return n;
}

double AdaptiveMseEvaluator::value(std::span<const int> members, bool* projected) const {
  const std::int64_t n2 = n_double_prime(members);
  const int m = static_cast<int>(members.size());
  const double zeta = params_.zeta(m, n2);

  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;
  if (m > 16) {
    const std::vector<int> idx(members.begin(), members.end());
    const auto proj = project_positive(s_(idx, idx), zeta);
    if (projected) *projected = proj.projected();
    const double v = trace_ - (proj.inverse() * s2_(idx, idx)).trace();
    return std::max(0.0, v);
  }
  Small s_aa(m, m), q(m, m);
  for (int p = 0; p < m; ++p)
    for (int r = 0; r < m; ++r) {
      s_aa(p, r) = s_(members[p], members[r]);
      q(p, r) = s2_(members[p], members[r]);
    }
  // Every eigenvalue of S_AA >= zeta forces S_AA - zeta I to be positive
  // definite, and then no eigenvalue is lifted.
  Small shifted = s_aa;
  shifted.diagonal().array() -= zeta;
  Eigen::LLT<Small> shifted_llt(shifted);
  if (shifted_llt.info() == Eigen::Success) {
    Eigen::LLT<Small> llt(s_aa);
    if (projected) *projected = false;
    return std::max(0.0, trace_ - llt.solve(q).trace());
  }
  Eigen::SelfAdjointEigenSolver<Small> es(s_aa);
  if (es.info() != Eigen::Success) throw EigenFailure();
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1> lambda = es.eigenvalues();
  bool lifted = false;
  for (int p = 0; p < m; ++p)
    if (lambda(p) < zeta) {
      lambda(p) = zeta;
      lifted = true;
    }
  if (projected) *projected = lifted;
  const Small v = es.eigenvectors();
  const Small w = v.transpose() * q * v;
  double explained = 0.0;
  for (int p = 0; p < m; ++p) explained += w(p, p) / lambda(p);
  return std::max(0.0, trace_ - explained);
}

MseEstimate<double> AdaptiveMseEvaluator::evaluate(const Subset& A) const {
  if (A.dim_total() != static_cast<int>(s_.rows()))
    throw DimensionMismatch("subset and ledger dimensions differ");
  bool projected = false;
  const double v = value(A.members(), &projected);
  const auto n2 = n_double_prime(A.members());
  return {A, v, n2, projected, params_.zeta(A.size(), n2)};
}

}  // namespace subsel
