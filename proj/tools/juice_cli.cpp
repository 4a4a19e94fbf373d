// Command-line front end: Monte-Carlo experiment runner for the clustered
// activity-detection / channel-estimation simulator.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "juice/juice.hpp"

namespace {

using namespace juice;

void apply_algo_list(ExperimentConfig& cfg, const std::string& list) {
  cfg.run_emep = cfg.run_admm = cfg.run_irw = cfg.run_oracle = false;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "emep") cfg.run_emep = true;
    else if (tok == "corr_map_admm") cfg.run_admm = true;
    else if (tok == "irw_l21") cfg.run_irw = true;
    else if (tok == "oracle_mmse") cfg.run_oracle = true;
    else throw ConfigError("unknown algorithm in --algo: " + tok);
  }
}

void print_table(const ResultTable& table, SweepAxis axis) {
  std::printf("%-10s %-15s %7s %5s %9s %9s %10s %9s\n", axis_name(axis),
              "algorithm", "trials", "fail", "mean_srr", "nmse", "nmse_db",
              "iters");
  for (const auto& r : table.rows)
    std::printf("%-10g %-15s %7d %5d %9.4f %9.5f %10.3f %9.1f\n",
                r.sweep_value, r.algorithm.c_str(), r.trials, r.failures,
                r.mean_srr, r.nmse, r.nmse_db, r.mean_iters);
  for (const auto& w : table.warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void run_trace_trial(const ExperimentConfig& cfg) {
  ScenarioConfig sc_cfg = cfg.scenario;
  if (cfg.axis != SweepAxis::None && !cfg.sweep_values.empty())
    apply_sweep(sc_cfg, cfg.axis, cfg.sweep_values.front());
  sc_cfg.seed = derive_seed(cfg.master_seed, 0, 0);
  Scenario sc = generate_scenario(sc_cfg);
  PriorInfo prior = prior_info(sc);
  if (cfg.run_emep) {
    EmEpConfig ec = cfg.emep;
    ec.trace = true;
    auto r = run_em_ep(sc.Y, sc.Phi, sc.sigma2, prior, ec);
    std::fprintf(stderr, "# emep trace (iter, frob_change, live_clusters)\n");
    for (const auto& t : r.trace)
      std::fprintf(stderr, "emep %3d %.6e %d\n", t.iter, t.frob_change,
                   t.live_clusters);
  }
  if (cfg.run_admm) {
    AdmmConfig ac = cfg.admm;
    ac.trace = true;
    auto r = run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, prior, ac);
    std::fprintf(stderr,
                 "# corr_map_admm trace (iter, objective, |X-Z|, |X-V|, |J|)\n");
    for (const auto& t : r.trace)
      std::fprintf(stderr, "admm %3d %.6e %.3e %.3e %d\n", t.iter, t.objective,
                   t.r_primal_z, t.r_primal_v, t.active_clusters);
  }
}

int cmd_run(const std::string& config_path, std::uint64_t* seed,
            std::string* out, int* trials, std::string* algos, bool trace) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed) cfg.master_seed = *seed;
  if (out) cfg.output_dir = *out;
  if (trials) cfg.trials = *trials;
  if (algos) apply_algo_list(cfg, *algos);
  cfg.validate();
  if (trace) run_trace_trial(cfg);
  ResultTable table = run_experiment(cfg);
  emit_outputs(table, cfg, cfg.output_dir);
  print_table(table, cfg.axis);
  std::printf("wrote %s/results.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_grid(const std::string& config_path, const std::string& grid_path,
             std::string* out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (out) cfg.output_dir = *out;
  std::ifstream in(grid_path);
  if (!in) throw IoError("cannot open grid file: " + grid_path);
  json grid;
  try {
    in >> grid;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("grid parse error: ") + e.what());
  }
  GridSearchResult g = grid_search(cfg, grid);
  emit_grid_outputs(g, cfg.output_dir);
  for (const auto& [alg, best] : g.best)
    std::printf("%s best: %s\n", alg.c_str(), best.dump().c_str());
  std::printf("wrote %s/grid_results.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_demo(const std::string& out, int trials, int threads) {
  ExperimentConfig cfg;  // defaults are the clustered reference setup
  cfg.axis = SweepAxis::TauP;
  cfg.sweep_values = {12, 16, 20, 24, 28};
  cfg.trials = trials;
  cfg.master_seed = 2024;
  cfg.output_dir = out;
  cfg.threads = threads;
  cfg.validate();

  std::printf("demo: N=%d UEs in %d clusters, K=%d active over %d clusters, "
              "M=%d antennas, SNR=%g dB, %d trials per pilot length\n",
              cfg.scenario.N, cfg.scenario.N_c, cfg.scenario.K,
              cfg.scenario.active_clusters, cfg.scenario.M,
              cfg.scenario.snr_db, cfg.trials);
  ResultTable table = run_experiment(cfg);
  emit_outputs(table, cfg, cfg.output_dir);
  print_table(table, cfg.axis);
  std::printf(
      "\nreference points (visual comparison): the cluster-aware estimators "
      "are expected to reach the reweighted-l21 SRR with roughly 25%% shorter "
      "pilots, and EM-EP to gain about 4 dB NMSE at moderate SNR.\n");
  std::printf("wrote %s/results.csv\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered activity detection and channel estimation simulator"};
  app.require_subcommand(1);

  std::string config_path, grid_path, algo_list, out_dir;
  std::uint64_t seed = 0;
  int trials = 0;
  int threads = 0;
  bool trace = false;

  CLI::App* run = app.add_subcommand("run", "run a config-driven experiment");
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  auto* seed_opt = run->add_option("--seed", seed, "override master seed");
  auto* out_opt = run->add_option("--out", out_dir, "override output directory");
  auto* trials_opt = run->add_option("--trials", trials, "override trial count");
  auto* algo_opt =
      run->add_option("--algo", algo_list, "comma-separated algorithm subset");
  run->add_flag("--trace", trace, "print per-iteration diagnostics for trial 0");

  CLI::App* grid = app.add_subcommand("grid", "hyper-parameter grid search");
  grid->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  grid->add_option("--grid", grid_path, "grid file (JSON)")->required();
  auto* gout_opt = grid->add_option("--out", out_dir, "override output directory");

  CLI::App* demo = app.add_subcommand(
      "demo", "run the default clustered scenario across pilot lengths");
  std::string demo_out = "demo_out";
  int demo_trials = 25;
  demo->add_option("--out", demo_out, "output directory");
  demo->add_option("--trials", demo_trials, "trials per sweep point");
  demo->add_option("--threads", threads, "worker threads (0 = auto)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run))
      return cmd_run(config_path, seed_opt->count() ? &seed : nullptr,
                     out_opt->count() ? &out_dir : nullptr,
                     trials_opt->count() ? &trials : nullptr,
                     algo_opt->count() ? &algo_list : nullptr, trace);
    if (app.got_subcommand(grid))
      return cmd_grid(config_path, grid_path,
                      gout_opt->count() ? &out_dir : nullptr);
    if (app.got_subcommand(demo)) return cmd_demo(demo_out, demo_trials, threads);
  } catch (const juice::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const juice::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
