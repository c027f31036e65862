// Acceptance run: one PASS/FAIL line per criterion, indented detail lines
// below it. Exit status is nonzero when any criterion fails.
//
//   subsel_acceptance [--profile ci|full] [--threads N]
//
// The ci profile runs the bandit criterion on the 8-arm analogue with 50
// replications; full uses the 20-arm matrices with 200.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "subsel/harness.hpp"
#include "subsel/lower_bound.hpp"

using namespace subsel;

namespace {

int failures = 0;

void verdict(bool ok, const std::string& id, const std::string& what) {
  std::printf("%s %s %s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str());
  std::fflush(stdout);
  failures += !ok;
}

template <typename... Args>
void detail(const char* format, Args... args) {
  std::printf("    ");
  std::printf(format, args...);
  std::printf("\n");
}

std::size_t column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == name) return i;
  throw std::runtime_error("no column " + name);
}

double cell(const Table& t, std::size_t row, const std::string& name) {
  return std::stod(t.rows[row][column(t, name)]);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// ---------------------------------------------------------------------------

void table1(unsigned threads) {
  Timer timer;
  ExperimentConfig c = default_config(Experiment::Table1);
  c.replications = 1000;
  c.threads = threads;
  const auto r = run_table1(c);
  const double expected[] = {15.0, 14.96, 15.0};
  bool ok = r.summary.rows.size() == 3;
  for (std::size_t i = 0; i < r.summary.rows.size(); ++i) {
    const double truth = cell(r.summary, i, "true_mse");
    const double mean = cell(r.summary, i, "mean_estimate");
    const bool row_ok = std::abs(mean - truth) <= 0.05 && std::abs(truth - expected[i]) <= 0.01;
    ok = ok && row_ok;
    detail("%s true %.6f mean %.6f (se %.4f) diff %+.4f", r.summary.rows[i][0].c_str(), truth, mean,
           cell(r.summary, i, "se_estimate"), mean - truth);
  }
  detail("%.1fs", timer.seconds());
  verdict(ok, "1", "non-adaptive estimates on the three 20-arm matrices at n=2000");
}

void optimal_counts(unsigned threads) {
  Timer timer;
  const std::pair<Benchmark, std::size_t> cases[] = {
      {Benchmark::Sigma1, 1820}, {Benchmark::Sigma2, 279}, {Benchmark::Sigma3, 1820}};
  bool ok = true;
  for (const auto& [b, want] : cases) {
    const auto truth = ground_truth(benchmark_sigma(b), 5, threads);
    const std::size_t got = truth.optimal_set.size();
    ok = ok && got == want && truth.subset_count() == 15504;
    detail("%s optimal %zu of %zu (expected %zu), min %.6f", benchmark_name(b).c_str(), got,
           truth.subset_count(), want, truth.min_mse);
  }
  detail("%.1fs", timer.seconds());
  verdict(ok, "2", "optimal-set sizes over all 5-subsets");
}

void pac(bool full, unsigned threads) {
  Timer timer;
  ExperimentConfig c = default_config(Experiment::BanditPac);
  c.matrices = {"sigma1", "sigma2", "sigma3"};
  c.tail_dim = full ? 16 : 4;
  c.replications = full ? 200 : 50;
  c.threads = threads;
  const auto r = run_bandit_pac(c);
  bool ok = true;
  for (std::size_t i = 0; i < r.summary.rows.size(); ++i) {
    const double d = cell(r.summary, i, "delta");
    const double err = cell(r.summary, i, "empirical_error");
    const double slack = cell(r.summary, i, "error_slack");
    const bool row_ok = err <= d + slack;
    ok = ok && row_ok;
    detail("%s delta %.2f error %.3f allowed %.4f truncated %s pulls %.0f %s",
           r.summary.rows[i][0].c_str(), d, err, d + slack,
           r.summary.rows[i][column(r.summary, "truncated")].c_str(),
           cell(r.summary, i, "mean_subset_pulls"), row_ok ? "" : "<-");
  }
  detail("K=%d, %d replications, %.1fs", 4 + c.tail_dim, c.replications, timer.seconds());
  verdict(ok, "3", std::string("successive elimination error rate within delta (") +
                       (full ? "full" : "ci") + " profile)");
}

void error_decay(unsigned threads) {
  Timer timer;
  ExperimentConfig c = default_config(Experiment::EstimationSweep);
  c.matrices = {"sigma1", "sigma2", "sigma3"};
  c.sample_grid = {100, 500, 1000, 2000};
  c.replications = 200;
  c.threads = threads;
  const auto r = run_estimation_sweep(c);
  bool ok = true;
  for (std::size_t mi = 0; mi < 3; ++mi) {
    std::string line = c.matrices[mi] + " median |err|:";
    double prev = INFINITY;
    for (std::size_t xi = 0; xi < 4; ++xi) {
      const double med = cell(r.summary, mi * 4 + xi, "median_abs_error");
      ok = ok && med <= prev;
      prev = med;
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.4f", med);
      line += buf;
    }
    detail("%s", line.c_str());
  }
  detail("%.1fs", timer.seconds());
  verdict(ok, "4", "median estimation error non-increasing in n");
}

// ---------------------------------------------------------------------------

Matrix<double> random_pd(int K, Rng& rng) {
  Matrix<double> b(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) b(i, j) = standard_normal(rng);
  Matrix<double> s = b * b.transpose() / K;
  s.diagonal().array() += 0.05;
  return 0.5 * (s + s.transpose());
}

int draw_int(Rng& rng, int lo, int hi) {
  return std::min(hi, lo + static_cast<int>(uniform_open(rng) * (hi - lo + 1)));
}

Subset draw_subset_of(int K, int m, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) all[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i)
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(draw_int(rng, i, K - 1))]);
  return Subset(std::vector<int>(all.begin(), all.begin() + m), K);
}

constexpr int kCases = 200;

void prop_routes() {
  Rng rng = make_rng({101, 0});
  double worst = 0.0;
  for (int c = 0; c < kCases; ++c) {
    const int K = draw_int(rng, 2, 8);
    const auto sigma = validate(random_pd(K, rng));
    const Subset A = draw_subset_of(K, draw_int(rng, 1, K), rng);
    worst = std::max(worst, std::abs(true_mse_trace(sigma, A) - true_mse_expanded(sigma, A)));
  }
  detail("%d cases, worst difference %.3g", kCases, worst);
  verdict(worst <= 1e-9, "5a", "trace and expanded MSE agree");
}

void prop_monotone() {
  Rng rng = make_rng({102, 0});
  int bad = 0;
  for (int c = 0; c < kCases; ++c) {
    const int K = draw_int(rng, 2, 8);
    const auto sigma = validate(random_pd(K, rng));
    const int m = draw_int(rng, 1, K - 1);
    const Subset A = draw_subset_of(K, m, rng);
    std::vector<int> grown(A.members().begin(), A.members().end());
    for (int j = 0; j < K; ++j)
      if (!A.contains(j)) {
        grown.push_back(j);
        break;
      }
    bad += true_mse_trace(sigma, Subset(grown, K)) > true_mse_trace(sigma, A) + 1e-12;
  }
  detail("%d cases, %d violations", kCases, bad);
  verdict(bad == 0, "5b", "MSE never increases when an arm is added");
}

void prop_projection() {
  Rng rng = make_rng({103, 0});
  int bad = 0;
  for (int c = 0; c < kCases; ++c) {
    const int K = draw_int(rng, 1, 8);
    Matrix<double> s(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = standard_normal(rng);
    const double zeta = 0.01 + uniform_open(rng);
    const auto p = project_positive(s, zeta);
    Eigen::SelfAdjointEigenSolver<Matrix<double>> e(p.matrix());
    bad += e.eigenvalues().minCoeff() < zeta - 1e-9;
    // Above zeta the projection must leave the matrix alone.
    const Matrix<double> pd = random_pd(K, rng) + zeta * Matrix<double>::Identity(K, K);
    const auto q = project_positive(pd, zeta);
    bad += q.projected() || !q.matrix().isApprox(pd, 1e-10);
  }
  detail("%d cases, %d violations", kCases, bad);
  verdict(bad == 0, "5c", "projection lifts to zeta and is a no-op above it");
}

void prop_kl() {
  Rng rng = make_rng({104, 0});
  int bad = 0;
  for (int c = 0; c < kCases; ++c) {
    const int K = draw_int(rng, 1, 8);
    const auto a = random_pd(K, rng), b = random_pd(K, rng);
    bad += gaussian_kl(a, b) < 0.0;
    bad += std::abs(gaussian_kl(a, a)) > 1e-10;
  }
  const Matrix<double> id = Matrix<double>::Identity(5, 5);
  bad += gaussian_kl(id, id) != 0.0;
  detail("%d cases, %d violations", kCases, bad);
  verdict(bad == 0, "5d", "Gaussian KL nonnegative and zero between equal covariances");
}

std::vector<double> rho_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

void prop_kl_bounds() {
  int checked = 0, bad = 0, bad_s0 = 0, bad_s1 = 0;
  double worst = 0.0;
  std::string worst_at;
  for (int K = 4; K <= 8; ++K)
    for (double rho : rho_grid())
      for (const auto& tr : alternative_instances(K, rho)) {
        const auto table = kl_table(tr);
        for (int i = 0; i < K; ++i)
          for (int j = i + 1; j < K; ++j) {
            const auto b = kl_upper_bound(tr, i, j);
            if (!b) continue;
            ++checked;
            const double excess = table(i, j) - *b;
            if (excess <= 1e-12) continue;
            ++bad;
            (tr.swap_row == 0 ? bad_s0 : bad_s1) += 1;
            if (excess > worst) {
              worst = excess;
              char buf[96];
              std::snprintf(buf, sizeof buf, "K=%d rho=%.1f swap (%d,%d) pair (%d,%d)", K, rho,
                            tr.swap_row, tr.target_row, i, j);
              worst_at = buf;
            }
          }
      }
  detail("%d bounded pairs, %d exceed the bound (swap row 0: %d, swap row 1: %d)", checked, bad,
         bad_s0, bad_s1);
  if (bad) detail("largest excess %.4g at %s", worst, worst_at.c_str());
  verdict(bad == 0, "5e", "pairwise KL below its closed-form bound over K 4..8, rho 0.1..0.9");
}

void prop_gap_closed_form() {
  int compared = 0, skipped = 0;
  double worst = 0.0;
  std::string worst_at;
  for (int K = 3; K <= 8; ++K)
    for (double rho : rho_grid()) {
      double direct;
      try {
        direct = brute_force_gap(K, rho);
      } catch (const NotPositiveSemiDefinite&) {
        ++skipped;
        continue;
      }
      ++compared;
      const double diff = std::abs(direct - instance_gap(K, rho));
      if (diff > worst) {
        worst = diff;
        char buf[96];
        std::snprintf(buf, sizeof buf, "K=%d rho=%.1f: closed %.6f direct %.6f", K, rho,
                      instance_gap(K, rho), direct);
        worst_at = buf;
      }
    }
  detail("%d grid points compared, %d skipped as indefinite", compared, skipped);
  detail("largest difference %.4g (%s)", worst, worst_at.c_str());
  verdict(worst <= 1e-8, "5f", "closed-form gap matches direct evaluation");
}

void prop_gap_floor() {
  int bad = 0, bad_direct = 0, points = 0, psd_points = 0;
  for (int K = 3; K <= 8; ++K)
    for (double rho : rho_grid()) {
      ++points;
      bad += gap_floor(rho) > instance_gap(K, rho);
      try {
        bad_direct += gap_floor(rho) > brute_force_gap(K, rho);
        ++psd_points;
      } catch (const NotPositiveSemiDefinite&) {
      }
    }
  detail("closed-form gap below the floor at %d of %d points", bad, points);
  detail("info: directly evaluated gap below the floor at %d of %d definite points", bad_direct,
         psd_points);
  verdict(bad == 0, "5g", "rho^4/(4(1+rho^2)) <= gap over K 3..8, rho 0.1..0.9");
}

void prop_lower_bound_vs_se() {
  Timer timer;
  const int K = 5;
  const double rho = 0.6, delta = 0.1;
  const auto sigma = lower_bound_instance(K, rho);
  const auto truth = ground_truth(sigma, 2);
  const double lb = lower_bound_value(delta, instance_gap(K, rho));
  EliminationOptions o;
  o.delta = delta;
  o.record_history = false;
  const int reps = 20;
  double pulls = 0.0;
  int correct = 0, truncated = 0;
  for (int r = 0; r < reps; ++r) {
    const auto run = run_successive_elimination(sigma, 2, o, {2024, static_cast<std::uint64_t>(r)}, &truth);
    pulls += static_cast<double>(run.subset_pulls);
    correct += *run.correct;
    truncated += run.truncated;
  }
  pulls /= reps;
  detail("lower bound %.4f, mean subset pulls %.1f over %d runs (%d correct, %d truncated), %.1fs", lb,
         pulls, reps, correct, truncated, timer.seconds());
  verdict(lb <= pulls, "5h", "lower bound below the pulls successive elimination needs");
}

void info_best_pair() {
  int psd = 0, zero_one = 0;
  for (int K = 3; K <= 8; ++K)
    for (double rho : rho_grid()) {
      try {
        const auto truth = ground_truth(lower_bound_instance(K, rho), 2);
        ++psd;
        zero_one += truth.is_optimal(Subset({0, 1}, K));
      } catch (const NotPositiveSemiDefinite&) {
      }
    }
  detail("info: {0,1} optimal at %d of %d definite grid points", zero_one, psd);
}

// ---------------------------------------------------------------------------

void tail_check() {
  Timer timer;
  const auto sigma = benchmark_sigma(Benchmark::Sigma1);
  const Subset A({15, 16, 17, 18, 19}, 20);
  const double truth = true_mse_trace(sigma, A);
  const Factor factor = factorize(sigma);
  const std::vector<int> grid{100, 250, 500, 1000, 2000};
  const int reps = 2000;
  const double eps = 0.5;
  std::vector<double> p;
  for (std::size_t xi = 0; xi < grid.size(); ++xi) {
    int over = 0;
    for (int r = 0; r < reps; ++r) {
      Rng rng = make_rng({77, (static_cast<std::uint64_t>(xi) << 32) | static_cast<std::uint64_t>(r)});
      const Matrix<double> x = draw_batch(factor, grid[xi], rng);
      ProjectionParams params;
      params.reg = estimate_regularity(Matrix<double>(x.transpose() * x / grid[xi]), A);
      over += std::abs(estimate_mse_nonadaptive(x, A, params).value - truth) > eps;
    }
    p.push_back(static_cast<double>(over) / reps);
  }
  bool ok = p.front() > 0.0 && p.back() < p.front();
  std::string line = "P(|err| > 0.5):";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i > 0 && p[i - 1] > 0.0) ok = ok && p[i] < p[i - 1];
    if (i > 0 && p[i - 1] == 0.0) ok = ok && p[i] == 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, " n=%d %.4f (log %.2f)", grid[i], p[i], std::log(p[i]));
    line += buf;
  }
  detail("%s", line.c_str());
  detail("%d replications per n, %.1fs", reps, timer.seconds());
  verdict(ok, "6", "empirical tail probability decreasing in n");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  Timer timer;
  const auto base = std::filesystem::temp_directory_path() / "subsel_acceptance";
  std::filesystem::remove_all(base);
  bool ok = true;
  for (auto e : {Experiment::EstimationSweep, Experiment::Table1, Experiment::BanditPac,
                 Experiment::LowerBoundGrid}) {
    ExperimentConfig c = default_config(e);
    c.tail_dim = 4;
    c.replications = e == Experiment::BanditPac ? 8 : 50;
    c.seed = 31;
    c.output_dir = (base / "cfg").string();
    if (e == Experiment::Table1) c.subset = "3,4,5,6,7";
    std::size_t files = 0, same = 0;
    const auto a = base / (experiment_name(e) + "_a");
    const auto b = base / (experiment_name(e) + "_b");
    write_outputs(run_experiment(c), a);
    c.threads = 2;
    write_outputs(run_experiment(c), b);
    for (const auto& f : std::filesystem::directory_iterator(a)) {
      ++files;
      same += slurp(f.path()) == slurp(b / f.path().filename());
    }
    // config.echo records the thread count, so it alone may differ.
    const bool exp_ok = files >= 4 && same + 1 >= files &&
                        slurp(a / "summary.csv") == slurp(b / "summary.csv") &&
                        slurp(a / "detail.jsonl") == slurp(b / "detail.jsonl");
    ExperimentConfig again = c;
    again.threads = 1;
    write_outputs(run_experiment(again), base / (experiment_name(e) + "_c"));
    std::size_t same_c = 0;
    for (const auto& f : std::filesystem::directory_iterator(a))
      same_c += slurp(f.path()) == slurp(base / (experiment_name(e) + "_c") / f.path().filename());
    ok = ok && exp_ok && same_c == files;
    detail("%s: %zu files, identical on rerun %zu, identical with 2 threads %zu",
           experiment_name(e).c_str(), files, same_c, same);
  }
  std::filesystem::remove_all(base);
  detail("%.1fs", timer.seconds());
  verdict(ok, "7", "reruns with the same seed write byte-identical outputs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string profile = "ci";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--profile", profile)->check(CLI::IsMember({"ci", "full"}));
  app.add_option("--threads", threads);
  CLI11_PARSE(app, argc, argv);

  Timer total;
  table1(threads);
  optimal_counts(threads);
  pac(profile == "full", threads);
  error_decay(threads);
  prop_routes();
  prop_monotone();
  prop_projection();
  prop_kl();
  prop_kl_bounds();
  prop_gap_closed_form();
  prop_gap_floor();
  prop_lower_bound_vs_se();
  info_best_pair();
  tail_check();
  determinism();
  std::printf("%d criteria failed, %.1fs\n", failures, total.seconds());
  return failures == 0 ? 0 : 1;
}
