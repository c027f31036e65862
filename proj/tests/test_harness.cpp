#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "subsel/harness.hpp"

using namespace subsel;

namespace {

ExperimentConfig small(Experiment e) {
  ExperimentConfig c = default_config(e);
  c.tail_dim = 4;
  c.replications = 20;
  c.seed = 7;
  c.timestamp = "t0";
  if (e == Experiment::EstimationSweep) c.sample_grid = {50, 100, 200, 400, 800};
  if (e == Experiment::BanditPac) {
    c.matrices = {"sigma1"};
    c.replications = 4;
    c.init_samples = 200;
  }
  if (e == Experiment::LowerBoundGrid) {
    c.K_grid = {4, 6};
    c.rho_grid = {0.3, 0.6};
  }
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = small(Experiment::BanditPac);
  c.deltas = {0.05, 0.2};
  c.width_mode = WidthMode::Theoretical;
  c.block_batches = true;
  const auto back = config_from_json(to_json(c), ExperimentConfig{});
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.experiment, Experiment::BanditPac);
  EXPECT_EQ(back.deltas, c.deltas);
}

TEST(Config, PartialJsonKeepsTheBase) {
  const auto c = config_from_json(R"({"matrix": "sigma2", "m": 3})", default_config(Experiment::Table1));
  EXPECT_EQ(c.matrices, std::vector<std::string>{"sigma2"});
  EXPECT_EQ(c.m, 3);
  EXPECT_EQ(c.sample_grid, std::vector<std::int64_t>{2000});
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_json(R"({"bogus": 1})", {}), ConfigError);
  EXPECT_THROW(config_from_json(R"({"m": "five"})", {}), ConfigError);
  EXPECT_THROW(config_from_json("[1, 2]", {}), ConfigError);
  EXPECT_THROW(config_from_json("{", {}), ConfigError);
  EXPECT_THROW(config_from_json(R"({"width_mode": "loose"})", {}), ConfigError);
  EXPECT_THROW(config_from_json(R"({"experiment": "nope"})", {}), ConfigError);
  EXPECT_THROW(config_from_json(R"({"deltas": [1.5]})", {}).check(), ConfigError);
  EXPECT_THROW(config_from_json(R"({"replications": 0})", {}).check(), ConfigError);
  EXPECT_THROW(config_from_json(R"({"sample_grid": [1]})", {}).check(), ConfigError);
  EXPECT_THROW(config_from_json(R"({"rho_grid": [1.0]})", {}).check(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json", {}), ConfigError);
  EXPECT_THROW(config_matrix("/nonexistent/matrix.txt", 16), ConfigError);
}

TEST(Config, SubsetMustHaveMMembers) {
  ExperimentConfig c = small(Experiment::EstimationSweep);
  c.subset = "0,1";
  EXPECT_THROW(run_estimation_sweep(c), ConfigError);
}

TEST(Harness, ExperimentNames) {
  for (auto e : {Experiment::EstimationSweep, Experiment::Table1, Experiment::BanditPac,
                 Experiment::LowerBoundGrid})
    EXPECT_EQ(parse_experiment(experiment_name(e)), e);
}

TEST(Harness, SweepPlotHasOneRowPerSampleSize) {
  const auto r = run_estimation_sweep(small(Experiment::EstimationSweep));
  const auto plots = emit_plot_data(r);
  ASSERT_EQ(plots.size(), 1u);
  const auto& t = plots.at("plot_estimation_sigma1.csv");
  EXPECT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.columns.front(), "n");
  EXPECT_EQ(r.rows.size(), 5u * 20u * 2u);
}

TEST(Harness, PacPlotHasOneRowPerDelta) {
  const auto r = run_bandit_pac(small(Experiment::BanditPac));
  const auto plots = emit_plot_data(r);
  const auto& t = plots.at("plot_pac_sigma1.csv");
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.columns[0], "delta");
  EXPECT_EQ(t.columns[1], "empirical_error");
  for (const auto& row : t.rows) {
    const double e = std::stod(row[1]);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
  }
}

TEST(Harness, LowerBoundGridFlagsIndefinitePatterns) {
  ExperimentConfig c = small(Experiment::LowerBoundGrid);
  c.K_grid = {8};
  c.rho_grid = {0.3, 0.9};
  const auto r = run_lower_bound_grid(c);
  ASSERT_EQ(r.summary.rows.size(), 2u);
  EXPECT_EQ(r.summary.rows[0][2], "1");
  EXPECT_EQ(r.summary.rows[1][2], "0");
  EXPECT_EQ(r.summary.rows[1][5], "nan");
  EXPECT_EQ(emit_plot_data(r).count("plot_lower_bound_K8.csv"), 1u);
}

TEST(Harness, EmptyResultsThrow) {
  ResultTable r;
  EXPECT_THROW(emit_plot_data(r), EmptyResults);
}

TEST(Harness, CsvQuoting) {
  Table t{{"a", "b"}, {{"{1,2}", "say \"hi\""}, {"x", ""}}};
  EXPECT_EQ(to_csv(t), "a,b\n\"{1,2}\",\"say \"\"hi\"\"\"\nx,\n");
}

TEST(Harness, ParallelForPropagatesErrors) {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] = 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw ZeroGap();
               }),
               ZeroGap);
}

TEST(Determinism, ThreadCountDoesNotChangeResults) {
  for (auto e : {Experiment::EstimationSweep, Experiment::BanditPac, Experiment::LowerBoundGrid}) {
    ExperimentConfig a = small(e), b = small(e);
    a.threads = 1;
    b.threads = 3;
    const auto ra = run_experiment(a), rb = run_experiment(b);
    EXPECT_EQ(to_jsonl(ra.rows), to_jsonl(rb.rows)) << experiment_name(e);
    EXPECT_EQ(to_csv(ra.summary), to_csv(rb.summary)) << experiment_name(e);
  }
}

TEST(Determinism, RepeatedRunsWriteIdenticalFiles) {
  const auto base = std::filesystem::temp_directory_path() / "subsel_det";
  std::filesystem::remove_all(base);
  ExperimentConfig c = small(Experiment::EstimationSweep);
  c.output_dir = (base / "run").string();
  write_outputs(run_experiment(c), base / "a");
  write_outputs(run_experiment(c), base / "b");
  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(base / "a")) {
    ++files;
    EXPECT_EQ(slurp(f.path()), slurp(base / "b" / f.path().filename())) << f.path();
  }
  EXPECT_EQ(files, 4u);
  const auto echoed = load_config(base / "a" / "config.echo", {});
  EXPECT_EQ(to_json(echoed), to_json(c));
  std::filesystem::remove_all(base);
}

TEST(Determinism, SeedChangesResults) {
  ExperimentConfig a = small(Experiment::EstimationSweep), b = a;
  b.seed = 8;
  EXPECT_NE(to_jsonl(run_experiment(a).rows), to_jsonl(run_experiment(b).rows));
}
