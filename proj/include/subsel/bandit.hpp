#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "subsel/covariance.hpp"
#include "subsel/estimation.hpp"
#include "subsel/sampling.hpp"

namespace subsel {

// ---------------------------------------------------------------------------
// Confidence width.
// ---------------------------------------------------------------------------

struct ConfidenceParams {
  double delta = 0.1;
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double width_scale = 1.0;
  int K = 2;
  int m = 1;

  /// Throws ConfigError unless delta in (0,1), every constant > 0, c3 <= 1,
  /// 1 <= m <= K.
  void check() const;
};

/// width_scale * (c2 L / (2 c3 t) + sqrt(c1 L / (2 c3 t))) with
/// L = log(70 C(K,m) K m^2 t^2 / delta).
double confidence_width(std::int64_t t, const ConfidenceParams& params);

/// Constants of the adaptive concentration bound, with c = 1/(lambda_min - eps)
/// at eps = eta/2 and C4 = 1.
struct TheoryConstants {
  double c, C4, C5, C6, C7;
  double G1, G2, G3;
  double c1, c2, c3;
};

TheoryConstants theory_constants(int m, const RegularityConstants& reg);

/// Width with the theoretical constants; c3 is replaced by min(c3, 1).
ConfidenceParams theoretical_params(int K, int m, double delta, const RegularityConstants& reg);

/// Unit constants, scaled so that alpha_1 equals the inter-quartile range of
/// `pilot` (its standard deviation if the IQR is 0, else 1), times
/// `user_scale`.
ConfidenceParams practical_params(int K, int m, double delta, std::span<const double> pilot,
                                  double user_scale = 1.0);

// ---------------------------------------------------------------------------
// Successive elimination.
// ---------------------------------------------------------------------------

enum class WidthMode { Practical, Theoretical };

struct EliminationOptions {
  double delta = 0.1;
  WidthMode width_mode = WidthMode::Practical;
  double width_scale = 1.0;
  /// Full-vector samples drawn before the first round.
  int init_samples = 1000;
  /// Maximum number of rounds.
  std::int64_t budget = 50'000;
  /// Stop early once the active set has not changed for this many rounds
  /// (0 disables). Such runs are reported as truncated.
  std::int64_t stall_rounds = 0;
  bool record_history = true;

  void check() const;
};

struct RoundRecord {
  std::int64_t t;
  std::int64_t active;
  double width;
  std::int64_t pulls;
};

struct RunRecord {
  Subset returned;
  /// Set only when ground truth was supplied.
  std::optional<bool> correct;
  bool truncated = false;
  /// Subset pulls after initialization.
  std::int64_t subset_pulls = 0;
  std::int64_t init_samples = 0;
  /// Scalar observations, initialization included (init_samples * K + pulls * m).
  std::int64_t scalar_samples = 0;
  std::int64_t rounds = 0;
  RngSeed seed{};
  std::int64_t final_active = 0;
  ConfidenceParams width{};
  std::vector<RoundRecord> history;
};

/// Index of the smallest estimate; the first one on ties.
std::size_t empirical_best(std::span<const double> estimates);

/// Keeps A unless estimate(A) - estimate(best) >= 2 width. Returns a mask in
/// the order of `estimates`.
std::vector<bool> survivors(std::span<const double> estimates, double width);

RunRecord run_successive_elimination(const CovarianceMatrix<double>& sigma, int m,
                                     const EliminationOptions& options, RngSeed seed,
                                     const ProblemInstance<double>* truth = nullptr);

struct UniformOptions {
  std::int64_t n_per_subset = 50;
  double delta = 0.1;
  /// Optional full-vector samples first; needed for m = 1, where subset
  /// pulls never observe a pair.
  int init_samples = 0;

  void check() const;
};

RunRecord run_uniform_baseline(const CovarianceMatrix<double>& sigma, int m,
                               const UniformOptions& options, RngSeed seed,
                               const ProblemInstance<double>* truth = nullptr);

/// sum over subsets with a positive gap of
/// (1/Delta) max(1, log(C(K,m) K m^2 log(1/Delta) / delta)).
/// Throws AllGapsZero when no subset has a positive gap.
double theorem1_bound(const ProblemInstance<double>& instance, double delta);

}  // namespace subsel
