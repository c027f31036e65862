#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "subsel/bandit.hpp"
#include "subsel/covariance.hpp"

namespace subsel {

enum class Experiment { EstimationSweep, Table1, BanditPac, LowerBoundGrid };

std::string experiment_name(Experiment e);
Experiment parse_experiment(const std::string& name);

/// JSON schema: every field below under the same name; "matrix" may be a
/// string or a list of strings. Unknown keys are rejected.
struct ExperimentConfig {
  Experiment experiment = Experiment::EstimationSweep;
  /// Benchmark names (sigma1, sigma2, sigma3) or matrix file paths.
  std::vector<std::string> matrices{"sigma1"};
  /// Tail size used when a benchmark name is given; 16 is the 20-arm matrix.
  int tail_dim = 16;
  int m = 5;
  /// Estimated subset, e.g. "15,16,17,18,19"; empty means the last m arms.
  std::string subset;
  std::vector<std::int64_t> sample_grid{100, 500, 1000, 2000};
  int replications = 1000;
  std::vector<double> deltas{0.05, 0.1, 0.2, 0.3};
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  /// Estimate each covariance block from its own batch.
  bool block_batches = false;

  WidthMode width_mode = WidthMode::Practical;
  double width_scale = 1.0;
  int init_samples = 1000;
  std::int64_t budget = 50'000;
  std::int64_t stall_rounds = 0;

  std::vector<int> K_grid{3, 4, 5, 6, 7, 8};
  std::vector<double> rho_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double lb_delta = 0.1;

  unsigned threads = 1;
  /// Copied verbatim into every result row.
  std::string timestamp;

  /// Throws ConfigError on any invariant violation.
  void check() const;
};

/// Defaults specific to an experiment (Table 1 uses all three matrices at
/// n = 2000; bandit runs default to 200 replications).
ExperimentConfig default_config(Experiment e);

std::string to_json(const ExperimentConfig& c, int indent = 2);
/// Fields absent from `json` keep their values in `base`.
ExperimentConfig config_from_json(const std::string& json, ExperimentConfig base);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base);

struct ResultRow {
  std::string experiment;
  std::string matrix;
  /// n, delta or rho depending on the experiment.
  double x = 0.0;
  std::int64_t replication = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string timestamp;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct ResultTable {
  Experiment experiment{};
  ExperimentConfig config;
  std::vector<ResultRow> rows;
  Table summary;
};

ResultTable run_estimation_sweep(const ExperimentConfig& config);
ResultTable run_table1(const ExperimentConfig& config);
ResultTable run_bandit_pac(const ExperimentConfig& config);
ResultTable run_lower_bound_grid(const ExperimentConfig& config);
ResultTable run_experiment(const ExperimentConfig& config);

/// One table per figure panel, keyed by file name. Throws EmptyResults.
std::map<std::string, Table> emit_plot_data(const ResultTable& result);

std::string to_csv(const Table& t);
/// One JSON object per row.
std::string to_jsonl(const std::vector<ResultRow>& rows);

/// summary.csv, detail.jsonl, config.echo and the plot tables under `dir`.
void write_outputs(const ResultTable& result, const std::filesystem::path& dir);

/// Runs task(i) for i in [0, n) on `threads` workers. The first exception
/// thrown is rethrown after every worker has stopped.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task);

/// Matrix named in a config, with the benchmark tail size applied.
CovarianceMatrix<double> config_matrix(const std::string& name, int tail_dim);

}  // namespace subsel
