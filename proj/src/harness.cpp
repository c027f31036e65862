#include "subsel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "subsel/lower_bound.hpp"

namespace subsel {

using nlohmann::json;

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::EstimationSweep: return "estimation_sweep";
    case Experiment::Table1: return "table1";
    case Experiment::BanditPac: return "bandit_pac";
    case Experiment::LowerBoundGrid: return "lower_bound_grid";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& name) {
  for (auto e : {Experiment::EstimationSweep, Experiment::Table1, Experiment::BanditPac,
                 Experiment::LowerBoundGrid})
    if (experiment_name(e) == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

namespace {

std::string width_mode_name(WidthMode w) {
  return w == WidthMode::Practical ? "practical" : "theoretical";
}

WidthMode parse_width_mode(const std::string& s) {
  if (s == "practical") return WidthMode::Practical;
  if (s == "theoretical") return WidthMode::Theoretical;
  throw ConfigError("unknown width mode '" + s + "'");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(std::int64_t v) { return std::to_string(v); }

struct Stats {
  double mean = 0.0;
  double se = 0.0;
  double median = 0.0;
};

Stats stats(std::vector<double> v) {
  Stats s;
  if (v.empty()) return s;
  const auto n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return s;
}

std::uint64_t stream_id(std::size_t matrix_idx, std::size_t x_idx, std::int64_t rep) {
  return (static_cast<std::uint64_t>(matrix_idx) << 48) | (static_cast<std::uint64_t>(x_idx) << 32) |
         static_cast<std::uint64_t>(rep);
}

Subset config_subset(const ExperimentConfig& c, int K) {
  if (!c.subset.empty()) {
    Subset s = parse_subset(c.subset, K);
    if (s.size() != c.m) throw ConfigError("subset " + s.to_string() + " does not have m members");
    return s;
  }
  if (c.m < 1 || c.m > K) throw InvalidCardinality(K, c.m);
  std::vector<int> last(static_cast<std::size_t>(c.m));
  std::iota(last.begin(), last.end(), K - c.m);
  return Subset(std::move(last), K);
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.matrix, a.x, a.replication) < std::tie(b.matrix, b.x, b.replication);
  });
}

}  // namespace

void ExperimentConfig::check() const {
  if (matrices.empty()) throw ConfigError("no matrix given");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (tail_dim < 1) throw ConfigError("tail_dim must be >= 1");
  if (m < 1) throw ConfigError("m must be >= 1");
  for (auto n : sample_grid)
    if (n < 2) throw ConfigError("sample grid values must be >= 2");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw ConfigError("deltas must lie in (0, 1)");
  if (!(width_scale > 0.0)) throw ConfigError("width_scale must be > 0");
  if (init_samples < 1) throw ConfigError("init_samples must be >= 1");
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (stall_rounds < 0) throw ConfigError("stall_rounds must be >= 0");
  for (int K : K_grid)
    if (K < 3) throw ConfigError("K grid values must be >= 3");
  for (double r : rho_grid)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("rho grid values must lie in (0, 1)");
  if (!(lb_delta > 0.0 && lb_delta < 1.0)) throw ConfigError("lb_delta must lie in (0, 1)");
  if (replications > (1LL << 31)) throw ConfigError("too many replications");
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  if (e == Experiment::Table1) {
    c.matrices = {"sigma1", "sigma2", "sigma3"};
    c.sample_grid = {2000};
    c.subset = "15,16,17,18,19";
  }
  if (e == Experiment::BanditPac) c.replications = 200;
  return c;
}

std::string to_json(const ExperimentConfig& c, int indent) {
  json j;
  j["experiment"] = experiment_name(c.experiment);
  j["matrix"] = c.matrices;
  j["tail_dim"] = c.tail_dim;
  j["m"] = c.m;
  j["subset"] = c.subset;
  j["sample_grid"] = c.sample_grid;
  j["replications"] = c.replications;
  j["deltas"] = c.deltas;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["block_batches"] = c.block_batches;
  j["width_mode"] = width_mode_name(c.width_mode);
  j["width_scale"] = c.width_scale;
  j["init_samples"] = c.init_samples;
  j["budget"] = c.budget;
  j["stall_rounds"] = c.stall_rounds;
  j["K_grid"] = c.K_grid;
  j["rho_grid"] = c.rho_grid;
  j["lb_delta"] = c.lb_delta;
  j["threads"] = c.threads;
  j["timestamp"] = c.timestamp;
  return j.dump(indent);
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "experiment", "matrix",   "tail_dim",     "m",        "subset",       "sample_grid",
      "replications", "deltas", "seed",         "output_dir", "block_batches", "width_mode",
      "width_scale", "init_samples", "budget",  "stall_rounds", "K_grid",   "rho_grid",
      "lb_delta",   "threads",  "timestamp"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  try {
    if (j.contains("experiment")) c.experiment = parse_experiment(j["experiment"].get<std::string>());
    if (j.contains("matrix")) {
      const auto& mj = j["matrix"];
      c.matrices = mj.is_string() ? std::vector<std::string>{mj.get<std::string>()}
                                  : mj.get<std::vector<std::string>>();
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("tail_dim", c.tail_dim);
    get("m", c.m);
    get("subset", c.subset);
    get("sample_grid", c.sample_grid);
    get("replications", c.replications);
    get("deltas", c.deltas);
    get("seed", c.seed);
    get("output_dir", c.output_dir);
    get("block_batches", c.block_batches);
    if (j.contains("width_mode")) c.width_mode = parse_width_mode(j["width_mode"].get<std::string>());
    get("width_scale", c.width_scale);
    get("init_samples", c.init_samples);
    get("budget", c.budget);
    get("stall_rounds", c.stall_rounds);
    get("K_grid", c.K_grid);
    get("rho_grid", c.rho_grid);
    get("lb_delta", c.lb_delta);
    get("threads", c.threads);
    get("timestamp", c.timestamp);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), std::move(base));
}

CovarianceMatrix<double> config_matrix(const std::string& name, int tail_dim) {
  if (name == "sigma1" || name == "sigma2" || name == "sigma3")
    return benchmark_sigma<double>(parse_benchmark(name), tail_dim);
  return load_covariance(name);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------

ResultTable run_estimation_sweep(const ExperimentConfig& config) {
  config.check();
  ResultTable out{config.experiment, config, {}, {}};
  out.summary.columns = {"matrix", "subset", "n", "replications", "true_mse", "mean_estimate",
                         "se_estimate", "mean_abs_error", "se_abs_error", "median_abs_error"};
  const std::string exp = experiment_name(config.experiment);
  const auto reps = static_cast<std::size_t>(config.replications);

  for (std::size_t mi = 0; mi < config.matrices.size(); ++mi) {
    const auto sigma = config_matrix(config.matrices[mi], config.tail_dim);
    const Subset A = config_subset(config, sigma.dim());
    const double truth = true_mse_trace(sigma, A);
    const Factor factor = factorize(sigma);

    for (std::size_t xi = 0; xi < config.sample_grid.size(); ++xi) {
      const auto n = config.sample_grid[xi];
      std::vector<double> est(reps);
      parallel_for(reps, config.threads, [&](std::size_t r) {
        Rng rng = make_rng({config.seed, stream_id(mi, xi, static_cast<std::int64_t>(r))});
        ProjectionParams p;
        p.rule = ZetaRule::NonAdaptive;
        p.delta = 0.1;
        if (config.block_batches) {
          BlockBatches<double> b{draw_batch(factor, static_cast<int>(n), rng),
                                 draw_batch(factor, static_cast<int>(n), rng),
                                 draw_batch(factor, static_cast<int>(n), rng),
                                 draw_batch(factor, static_cast<int>(n), rng)};
          const Matrix<double> s = b.aa.transpose() * b.aa / static_cast<double>(n);
          p.reg = estimate_regularity(s, A);
          est[r] = estimate_mse_nonadaptive(b, A, p).value;
        } else {
          const Matrix<double> x = draw_batch(factor, static_cast<int>(n), rng);
          const Matrix<double> s = x.transpose() * x / static_cast<double>(n);
          p.reg = estimate_regularity(s, A);
          est[r] = estimate_mse_nonadaptive(x, A, p).value;
        }
      });
      std::vector<double> err(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        err[r] = std::abs(est[r] - truth);
        const auto seed = config.seed;
        const auto rep = static_cast<std::int64_t>(r);
        const auto nd = static_cast<double>(n);
        out.rows.push_back({exp, config.matrices[mi], nd, rep, "estimate", est[r], seed, config.timestamp});
        out.rows.push_back({exp, config.matrices[mi], nd, rep, "abs_error", err[r], seed, config.timestamp});
      }
      const auto se = stats(est);
      const auto ae = stats(err);
      out.summary.rows.push_back({config.matrices[mi], A.to_string(), fmt(n), fmt(static_cast<std::int64_t>(config.replications)),
                                  fmt(truth), fmt(se.mean), fmt(se.se), fmt(ae.mean), fmt(ae.se),
                                  fmt(ae.median)});
    }
  }
  sort_rows(out.rows);
  return out;
}

ResultTable run_table1(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.experiment = Experiment::Table1;
  auto out = run_estimation_sweep(c);
  out.experiment = Experiment::Table1;
  return out;
}

ResultTable run_bandit_pac(const ExperimentConfig& config) {
  config.check();
  ResultTable out{Experiment::BanditPac, config, {}, {}};
  out.summary.columns = {"matrix",          "delta",           "replications",  "empirical_error",
                         "error_slack",     "truncated",       "errors_untruncated",
                         "mean_subset_pulls", "mean_scalar_samples", "mean_rounds"};
  const std::string exp = experiment_name(Experiment::BanditPac);
  const auto reps = static_cast<std::size_t>(config.replications);

  for (std::size_t mi = 0; mi < config.matrices.size(); ++mi) {
    const auto sigma = config_matrix(config.matrices[mi], config.tail_dim);
    if (config.m >= sigma.dim()) throw InvalidCardinality(sigma.dim(), config.m);
    const auto truth = ground_truth(sigma, config.m, config.threads);

    for (std::size_t di = 0; di < config.deltas.size(); ++di) {
      EliminationOptions opt;
      opt.delta = config.deltas[di];
      opt.width_mode = config.width_mode;
      opt.width_scale = config.width_scale;
      opt.init_samples = config.init_samples;
      opt.budget = config.budget;
      opt.stall_rounds = config.stall_rounds;
      opt.record_history = false;

      std::vector<RunRecord> runs(reps);
      parallel_for(reps, config.threads, [&](std::size_t r) {
        runs[r] = run_successive_elimination(
            sigma, config.m, opt, {config.seed, stream_id(mi, di, static_cast<std::int64_t>(r))}, &truth);
      });

      std::int64_t errors = 0, truncated = 0, errors_untrunc = 0;
      std::vector<double> pulls, scalars, rounds;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& run = runs[r];
        const bool wrong = !run.correct.value_or(false);
        errors += wrong;
        truncated += run.truncated;
        errors_untrunc += wrong && !run.truncated;
        pulls.push_back(static_cast<double>(run.subset_pulls));
        scalars.push_back(static_cast<double>(run.scalar_samples));
        rounds.push_back(static_cast<double>(run.rounds));
        const auto rep = static_cast<std::int64_t>(r);
        auto row = [&](const char* metric, double v) {
          out.rows.push_back({exp, config.matrices[mi], opt.delta, rep, metric, v,
                              run.seed.stream_id, config.timestamp});
        };
        row("correct", run.correct.value_or(false) ? 1.0 : 0.0);
        row("truncated", run.truncated ? 1.0 : 0.0);
        row("returned_rank", static_cast<double>(run.returned.rank()));
        row("subset_pulls", static_cast<double>(run.subset_pulls));
        row("scalar_samples", static_cast<double>(run.scalar_samples));
        row("rounds", static_cast<double>(run.rounds));
        row("final_active", static_cast<double>(run.final_active));
      }
      const double n = static_cast<double>(reps);
      const double d = opt.delta;
      out.summary.rows.push_back({config.matrices[mi], fmt(d), fmt(static_cast<std::int64_t>(config.replications)),
                                  fmt(static_cast<double>(errors) / n),
                                  fmt(2.0 * std::sqrt(d * (1.0 - d) / n)), fmt(truncated),
                                  fmt(errors_untrunc), fmt(stats(pulls).mean),
                                  fmt(stats(scalars).mean), fmt(stats(rounds).mean)});
    }
  }
  sort_rows(out.rows);
  return out;
}

ResultTable run_lower_bound_grid(const ExperimentConfig& config) {
  config.check();
  ResultTable out{Experiment::LowerBoundGrid, config, {}, {}};
  out.summary.columns = {"K",          "rho",        "psd",        "best_pair",  "gap_closed",
                         "gap_direct", "gap_floor",  "floor_holds", "lower_bound"};
  const std::string exp = experiment_name(Experiment::LowerBoundGrid);
  for (int K : config.K_grid)
    for (double rho : config.rho_grid) {
      const double closed = instance_gap(K, rho);
      const double floor = gap_floor(rho);
      double direct = std::nan("");
      std::string best = "-";
      bool psd = true;
      try {
        const auto sigma = lower_bound_instance<double>(K, rho);
        direct = true_mse_trace(sigma, Subset({1, 2}, K)) - true_mse_trace(sigma, Subset({0, 1}, K));
        const auto gt = ground_truth(sigma, 2);
        best = subset_from_rank(K, 2, gt.optimal_set.front()).to_string();
      } catch (const NotPositiveSemiDefinite&) {
        psd = false;
      }
      const double lb = closed >= 1e-12 ? lower_bound_value(config.lb_delta, closed) : std::nan("");
      const std::string key = "K" + std::to_string(K);
      auto row = [&](const char* metric, double v) {
        out.rows.push_back({exp, key, rho, 0, metric, v, config.seed, config.timestamp});
      };
      row("gap_closed", closed);
      row("gap_direct", direct);
      row("gap_floor", floor);
      row("lower_bound", lb);
      out.summary.rows.push_back({fmt(static_cast<std::int64_t>(K)), fmt(rho), psd ? "1" : "0", best,
                                  fmt(closed), fmt(direct), fmt(floor),
                                  floor <= closed ? "1" : "0", fmt(lb)});
    }
  sort_rows(out.rows);
  return out;
}

ResultTable run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case Experiment::EstimationSweep: return run_estimation_sweep(config);
    case Experiment::Table1: return run_table1(config);
    case Experiment::BanditPac: return run_bandit_pac(config);
    case Experiment::LowerBoundGrid: return run_lower_bound_grid(config);
  }
  throw ConfigError("unknown experiment");
}

// ---------------------------------------------------------------------------

std::map<std::string, Table> emit_plot_data(const ResultTable& result) {
  if (result.rows.empty() || result.summary.rows.empty()) throw EmptyResults();
  std::map<std::string, Table> plots;
  const auto& cols = result.summary.columns;
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
  };
  for (const auto& r : result.summary.rows) {
    switch (result.experiment) {
      case Experiment::EstimationSweep:
      case Experiment::Table1: {
        auto& t = plots["plot_estimation_" + r[col("matrix")] + ".csv"];
        t.columns = {"n", "mean_abs_error", "se_abs_error", "mean_estimate", "se_estimate"};
        t.rows.push_back({r[col("n")], r[col("mean_abs_error")], r[col("se_abs_error")],
                          r[col("mean_estimate")], r[col("se_estimate")]});
        break;
      }
      case Experiment::BanditPac: {
        auto& t = plots["plot_pac_" + r[col("matrix")] + ".csv"];
        t.columns = {"delta", "empirical_error", "mean_subset_pulls", "mean_scalar_samples"};
        t.rows.push_back({r[col("delta")], r[col("empirical_error")], r[col("mean_subset_pulls")],
                          r[col("mean_scalar_samples")]});
        break;
      }
      case Experiment::LowerBoundGrid: {
        auto& t = plots["plot_lower_bound_K" + r[col("K")] + ".csv"];
        t.columns = {"rho", "gap_closed", "gap_floor", "lower_bound"};
        t.rows.push_back({r[col("rho")], r[col("gap_closed")], r[col("gap_floor")], r[col("lower_bound")]});
        break;
      }
    }
  }
  return plots;
}

std::string to_csv(const Table& t) {
  std::string s;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
      if (!quote) {
        s += cells[i];
        continue;
      }
      s += '"';
      for (char ch : cells[i]) s += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      s += '"';
    }
    s += '\n';
  };
  line(t.columns);
  for (const auto& r : t.rows) line(r);
  return s;
}

std::string to_jsonl(const std::vector<ResultRow>& rows) {
  std::string s;
  for (const auto& r : rows) {
    json j;
    j["experiment"] = r.experiment;
    j["matrix"] = r.matrix;
    j["x"] = r.x;
    j["replication"] = r.replication;
    j["metric"] = r.metric;
    j["value"] = r.value;
    j["seed"] = r.seed;
    j["timestamp"] = r.timestamp;
    s += j.dump();
    s += '\n';
  }
  return s;
}

void write_outputs(const ResultTable& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / name).string());
    f << body;
  };
  write("summary.csv", to_csv(result.summary));
  write("detail.jsonl", to_jsonl(result.rows));
  write("config.echo", to_json(result.config) + "\n");
  for (const auto& [name, table] : emit_plot_data(result)) write(name, to_csv(table));
}

}  // namespace subsel
