// subsel: experiment driver.
//
//   subsel estimate-sweep --matrix sigma1 --sample-grid 100,500,1000,2000 --out runs/sweep
//   subsel table1 --replications 1000 --out runs/table1
//   subsel bandit-pac --matrix sigma2 --deltas 0.05,0.1 --out runs/pac
//   subsel lower-bound-grid --out runs/lb
//   subsel mse --matrix sigma1 --subset 15,16,17,18,19
//
// Exit status: 0 ok, 1 configuration error, 2 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "subsel/harness.hpp"

using namespace subsel;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> matrices;
  std::optional<int> tail_dim, m, replications, init_samples;
  std::optional<std::string> subset, output_dir, timestamp, width_mode;
  std::vector<std::int64_t> sample_grid;
  std::vector<double> deltas, rho_grid;
  std::vector<int> K_grid;
  std::optional<std::uint64_t> seed;
  std::optional<double> width_scale, lb_delta;
  std::optional<std::int64_t> budget, stall_rounds;
  std::optional<unsigned> threads;
  bool block_batches = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file; flags override its fields");
  cmd->add_option("--matrix", o.matrices, "sigma1|sigma2|sigma3 or a matrix file (repeatable)")
      ->delimiter(',');
  cmd->add_option("--tail-dim", o.tail_dim, "tail block size of the benchmark matrices");
  cmd->add_option("--m", o.m, "subset size");
  cmd->add_option("--replications", o.replications);
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--out,--output-dir", o.output_dir);
  cmd->add_option("--threads", o.threads);
  cmd->add_option("--timestamp", o.timestamp, "label copied into every row");
}

void add_estimation(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--subset", o.subset, "e.g. 15,16,17,18,19 (default: last m arms)");
  cmd->add_option("--sample-grid", o.sample_grid)->delimiter(',');
  cmd->add_flag("--block-batches", o.block_batches, "separate batch per covariance block");
}

void add_bandit(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--deltas,--delta", o.deltas)->delimiter(',');
  cmd->add_option("--init-samples", o.init_samples);
  cmd->add_option("--width-mode", o.width_mode)->check(CLI::IsMember({"practical", "theoretical"}));
  cmd->add_option("--width-scale", o.width_scale);
  cmd->add_option("--budget", o.budget, "maximum rounds");
  cmd->add_option("--stall-rounds", o.stall_rounds, "stop after this many rounds without elimination");
}

void add_lower_bound(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--K-grid", o.K_grid)->delimiter(',');
  cmd->add_option("--rho-grid", o.rho_grid)->delimiter(',');
  cmd->add_option("--lb-delta", o.lb_delta);
}

ExperimentConfig resolve(Experiment e, const Overrides& o) {
  ExperimentConfig c = default_config(e);
  if (!o.config.empty()) c = load_config(o.config, c);
  c.experiment = e;
  if (!o.matrices.empty()) c.matrices = o.matrices;
  if (o.tail_dim) c.tail_dim = *o.tail_dim;
  if (o.m) c.m = *o.m;
  if (o.replications) c.replications = *o.replications;
  if (o.init_samples) c.init_samples = *o.init_samples;
  if (o.subset) c.subset = *o.subset;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.timestamp) c.timestamp = *o.timestamp;
  if (o.width_mode)
    c.width_mode = *o.width_mode == "practical" ? WidthMode::Practical : WidthMode::Theoretical;
  if (!o.sample_grid.empty()) c.sample_grid = o.sample_grid;
  if (!o.deltas.empty()) c.deltas = o.deltas;
  if (!o.rho_grid.empty()) c.rho_grid = o.rho_grid;
  if (!o.K_grid.empty()) c.K_grid = o.K_grid;
  if (o.seed) c.seed = *o.seed;
  if (o.width_scale) c.width_scale = *o.width_scale;
  if (o.lb_delta) c.lb_delta = *o.lb_delta;
  if (o.budget) c.budget = *o.budget;
  if (o.stall_rounds) c.stall_rounds = *o.stall_rounds;
  if (o.threads) c.threads = *o.threads;
  if (o.block_batches) c.block_batches = true;
  c.check();
  return c;
}

int run(Experiment e, const Overrides& o) {
  const ExperimentConfig c = resolve(e, o);
  const ResultTable result = run_experiment(c);
  write_outputs(result, c.output_dir);
  std::cout << to_csv(result.summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subset selection for correlated Gaussian bandits"};
  app.require_subcommand(1);
  Overrides o;

  auto* sweep = app.add_subcommand("estimate-sweep", "estimation error against sample size");
  add_common(sweep, o);
  add_estimation(sweep, o);
  auto* table1 = app.add_subcommand("table1", "non-adaptive estimates on the three benchmarks");
  add_common(table1, o);
  add_estimation(table1, o);
  auto* pac = app.add_subcommand("bandit-pac", "successive elimination error rates");
  add_common(pac, o);
  add_bandit(pac, o);
  auto* grid = app.add_subcommand("lower-bound-grid", "gap and lower bound over (K, rho)");
  add_common(grid, o);
  add_lower_bound(grid, o);

  std::string mse_matrix, mse_subset;
  int mse_tail = 16;
  auto* mse = app.add_subcommand("mse", "exact MSE of one subset");
  mse->add_option("--matrix", mse_matrix)->required();
  mse->add_option("--subset", mse_subset)->required();
  mse->add_option("--tail-dim", mse_tail);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sweep) return run(Experiment::EstimationSweep, o);
    if (*table1) return run(Experiment::Table1, o);
    if (*pac) return run(Experiment::BanditPac, o);
    if (*grid) return run(Experiment::LowerBoundGrid, o);
    if (*mse) {
      const auto sigma = config_matrix(mse_matrix, mse_tail);
      const Subset A = parse_subset(mse_subset, sigma.dim());
      std::printf("%s %.15g\n", A.to_string().c_str(), true_mse_trace(sigma, A));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
