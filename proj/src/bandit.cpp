#include "subsel/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace subsel {

void ConfidenceParams::check() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0)) throw ConfigError("width constants must be > 0");
  if (c3 > 1.0) throw ConfigError("c3 must be <= 1");
  if (!(width_scale > 0.0)) throw ConfigError("width scale must be > 0");
  if (m < 1 || m > K) throw InvalidCardinality(K, m);
}

double confidence_width(std::int64_t t, const ConfidenceParams& p) {
  if (t < 1) throw ConfigError("round index must be >= 1");
  p.check();
  const double td = static_cast<double>(t);
  const double md = static_cast<double>(p.m);
  const double log_term = std::log(70.0 * static_cast<double>(binomial(p.K, p.m)) *
                                   static_cast<double>(p.K) * md * md * td * td / p.delta);
  const double a = log_term / (2.0 * p.c3 * td);
  return p.width_scale * (p.c2 * a + std::sqrt(p.c1 * a));
}

TheoryConstants theory_constants(int m, const RegularityConstants& reg) {
  if (m < 1) throw InvalidCardinality(m, m);
  const double md = static_cast<double>(m);
  const double eta = reg.eta;
  const double lambda_min = reg.M1;
  const double eps = eta / 2.0;
  if (!(lambda_min - eps > 0.0)) throw ConfigError("lambda_min - eta/2 must be > 0");
  TheoryConstants k{};
  k.c = 1.0 / (lambda_min - eps);
  k.C4 = 1.0;
  k.C5 = 160.0 * (k.c + 1.0 / reg.M1);
  k.C6 = 3.0 * k.c / reg.M1;
  k.C7 = k.c + 1.0 / reg.M1;
  k.G1 = std::max(8.0, md * std::pow(1.0 + eta, 3));
  k.G2 = std::max(1.0, k.C5);
  k.G3 = std::max({k.C4, k.C4 * k.C6 * k.C6, 72.0 * k.C7 * k.C7});
  const double l = reg.l;
  k.c1 = k.G1 * k.G2 * k.G2 * md * std::pow(1.0 + eta, 2) / (l * l);
  k.c2 = 12.0 * std::sqrt(2.0) * k.G1 * k.G2 / l;
  const double quartic = md * md * md * md - md * md;
  k.c3 = quartic > 0.0 ? l * l / (k.G3 * quartic * std::pow(1.0 + eta, 7))
                       : std::numeric_limits<double>::infinity();
  return k;
}

ConfidenceParams theoretical_params(int K, int m, double delta, const RegularityConstants& reg) {
  const auto k = theory_constants(m, reg);
  ConfidenceParams p{delta, k.c1, k.c2, std::min(k.c3, 1.0), 1.0, K, m};
  p.check();
  return p;
}

namespace {

double quantile7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ConfidenceParams practical_params(int K, int m, double delta, std::span<const double> pilot,
                                  double user_scale) {
  ConfidenceParams p{delta, 1.0, 1.0, 1.0, 1.0, K, m};
  p.check();
  if (!(user_scale > 0.0)) throw ConfigError("width scale must be > 0");
  double target = 0.0;
  if (pilot.size() >= 2) {
    const std::vector<double> v(pilot.begin(), pilot.end());
    target = quantile7(v, 0.75) - quantile7(v, 0.25);
    if (!(target > 0.0)) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      target = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  if (!(target > 0.0)) target = 1.0;
  p.width_scale = user_scale * target / confidence_width(1, p);
  return p;
}

// ---------------------------------------------------------------------------

void EliminationOptions::check() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(width_scale > 0.0)) throw ConfigError("width scale must be > 0");
  if (init_samples < 1) throw ConfigError("init_samples must be >= 1");
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (stall_rounds < 0) throw ConfigError("stall_rounds must be >= 0");
}

void UniformOptions::check() const {
  if (n_per_subset < 1) throw ConfigError("n_per_subset must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (init_samples < 0) throw ConfigError("init_samples must be >= 0");
}

std::size_t empirical_best(std::span<const double> estimates) {
  if (estimates.empty()) throw ConfigError("no estimates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < estimates.size(); ++i)
    if (estimates[i] < estimates[best]) best = i;
  return best;
}

std::vector<bool> survivors(std::span<const double> estimates, double width) {
  const double best = estimates[empirical_best(estimates)];
  std::vector<bool> keep(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) keep[i] = !(estimates[i] - best >= 2.0 * width);
  return keep;
}

namespace {

void check_problem(const CovarianceMatrix<double>& sigma, int m,
                   const ProblemInstance<double>* truth) {
  if (m < 1 || m >= sigma.dim()) throw InvalidCardinality(sigma.dim(), m);
  if (truth && (truth->K() != sigma.dim() || truth->m != m))
    throw DimensionMismatch("ground truth does not match the problem");
}

ProjectionParams adaptive_params(const SampleLedger& ledger, double delta) {
  ProjectionParams p;
  p.rule = ZetaRule::Adaptive;
  p.delta = delta;
  p.reg = estimate_regularity(ledger.entrywise_covariance());
  return p;
}

std::vector<double> estimate_all(const AdaptiveMseEvaluator& eval,
                                 const std::vector<Subset>& subsets) {
  std::vector<double> out(subsets.size());
  for (std::size_t i = 0; i < subsets.size(); ++i) out[i] = eval.value(subsets[i].members());
  return out;
}

}  // namespace

RunRecord run_successive_elimination(const CovarianceMatrix<double>& sigma, int m,
                                     const EliminationOptions& options, RngSeed seed,
                                     const ProblemInstance<double>* truth) {
  options.check();
  check_problem(sigma, m, truth);
  const int K = sigma.dim();
  GaussianSampler sampler(sigma, binomial(K, m) + 16);
  Rng rng = make_rng(seed);

  RunRecord rec;
  rec.seed = seed;
  rec.init_samples = options.init_samples;

  SampleLedger ledger(K);
  for (int i = 0; i < options.init_samples; ++i) ledger.update_full(sampler.draw_full(rng));

  const ProjectionParams proj = adaptive_params(ledger, options.delta);
  std::vector<Subset> active = enumerate_subsets(K, m);
  std::vector<double> est = estimate_all(AdaptiveMseEvaluator(ledger, proj), active);

  rec.width = options.width_mode == WidthMode::Practical
                  ? practical_params(K, m, options.delta, est, options.width_scale)
                  : theoretical_params(K, m, options.delta, proj.reg);
  if (options.width_mode == WidthMode::Theoretical) rec.width.width_scale = options.width_scale;

  std::int64_t unchanged = 0;
  for (std::int64_t t = 1; t <= options.budget; ++t) {
    for (const Subset& A : active) {
      const auto obs = sampler.draw_subset(A, rng);
      ledger.update(obs);
    }
    const auto pulled = static_cast<std::int64_t>(active.size());
    rec.subset_pulls += pulled;
    rec.rounds = t;

    est = estimate_all(AdaptiveMseEvaluator(ledger, proj), active);
    const double width = confidence_width(t, rec.width);
    const auto keep = survivors(est, width);
    std::size_t w = 0;
    for (std::size_t i = 0; i < active.size(); ++i)
      if (keep[i]) {
        if (w != i) active[w] = std::move(active[i]);
        est[w] = est[i];
        ++w;
      }
    unchanged = w == active.size() ? unchanged + 1 : 0;
    active.resize(w);
    est.resize(w);
    if (options.record_history)
      rec.history.push_back({t, static_cast<std::int64_t>(w), width, pulled});
    if (active.size() == 1) break;
    if (options.stall_rounds > 0 && unchanged >= options.stall_rounds) break;
  }

  rec.truncated = active.size() > 1;
  rec.final_active = static_cast<std::int64_t>(active.size());
  rec.returned = active[empirical_best(est)];
  rec.scalar_samples = rec.init_samples * K + rec.subset_pulls * m;
  if (truth) rec.correct = truth->is_optimal(rec.returned);
  return rec;
}

RunRecord run_uniform_baseline(const CovarianceMatrix<double>& sigma, int m,
                               const UniformOptions& options, RngSeed seed,
                               const ProblemInstance<double>* truth) {
  options.check();
  check_problem(sigma, m, truth);
  const int K = sigma.dim();
  GaussianSampler sampler(sigma, binomial(K, m) + 16);
  Rng rng = make_rng(seed);

  SampleLedger ledger(K);
  for (int i = 0; i < options.init_samples; ++i) ledger.update_full(sampler.draw_full(rng));
  const std::vector<Subset> all = enumerate_subsets(K, m);
  for (std::int64_t r = 0; r < options.n_per_subset; ++r)
    for (const Subset& A : all) ledger.update(sampler.draw_subset(A, rng));

  const auto est = estimate_all(AdaptiveMseEvaluator(ledger, adaptive_params(ledger, options.delta)), all);
  RunRecord rec;
  rec.seed = seed;
  rec.init_samples = options.init_samples;
  rec.rounds = options.n_per_subset;
  rec.subset_pulls = options.n_per_subset * static_cast<std::int64_t>(all.size());
  rec.scalar_samples = rec.init_samples * K + rec.subset_pulls * m;
  rec.final_active = static_cast<std::int64_t>(all.size());
  rec.returned = all[empirical_best(est)];
  if (truth) rec.correct = truth->is_optimal(rec.returned);
  return rec;
}

double theorem1_bound(const ProblemInstance<double>& instance, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  const int K = instance.K();
  const double m = instance.m;
  const double prefix = static_cast<double>(binomial(K, instance.m)) * K * m * m;
  double total = 0.0;
  bool any = false;
  for (double gap : instance.gaps) {
    if (!(gap > 0.0)) continue;
    any = true;
    const double inner = std::max(std::log(1.0 / gap), std::numeric_limits<double>::min());
    total += std::max(1.0, std::log(prefix * inner / delta)) / gap;
  }
  if (!any) throw AllGapsZero();
  return total;
}

}  // namespace subsel
