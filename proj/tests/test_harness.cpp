#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "juice/harness.hpp"

using namespace juice;
using Catch::Approx;

namespace {

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.scenario.N = 16;
  cfg.scenario.N_c = 4;
  cfg.scenario.L = 4;
  cfg.scenario.M = 2;
  cfg.scenario.tau_p = 10;
  cfg.scenario.K = 4;
  cfg.scenario.active_clusters = 2;
  cfg.scenario.per_cluster_active = 2;
  cfg.scenario.snr_db = 20.0;
  cfg.trials = 4;
  cfg.master_seed = 77;
  cfg.threads = 2;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing round trip") {
  json j = {
      {"scenario",
       {{"N", 16}, {"N_c", 4}, {"L", 4}, {"M", 2}, {"tau_p", 10}, {"K", 4},
        {"activity_mode", "clustered"}, {"active_clusters", 2},
        {"per_cluster_active", 2}, {"snr_db", 20.0}}},
      {"algorithms",
       {{"emep", {{"eta", 0.8}}},
        {"irw_l21", {{"lambda", 0.25}}},
        {"oracle_mmse", json::object()}}},
      {"sweep", {{"axis", "tau_p"}, {"values", {8, 10}}}},
      {"trials", 3},
      {"master_seed", 5},
      {"output_dir", "x"}};
  ExperimentConfig cfg = parse_experiment_config(j);
  CHECK(cfg.run_emep);
  CHECK_FALSE(cfg.run_admm);
  CHECK(cfg.run_irw);
  CHECK(cfg.run_oracle);
  CHECK(cfg.emep.eta == Approx(0.8));
  CHECK(cfg.irw.lambda == Approx(0.25));
  CHECK(cfg.axis == SweepAxis::TauP);
  CHECK(cfg.sweep_values == std::vector<double>{8, 10});
  CHECK(cfg.trials == 3);

  json bad = j;
  bad["scenario"]["N"] = 15;
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
}

TEST_CASE("experiment rows are one per sweep value and algorithm") {
  ExperimentConfig cfg = small_experiment();
  cfg.axis = SweepAxis::TauP;
  cfg.sweep_values = {8, 10, 12, 14};
  cfg.trials = 2;
  ResultTable t = run_experiment(cfg);
  CHECK(t.rows.size() == 16);  // 4 sweep values x 4 algorithms
}

TEST_CASE("identical configs give identical tables") {
  ExperimentConfig cfg = small_experiment();
  ResultTable a = run_experiment(cfg);
  ResultTable b = run_experiment(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].algorithm == b.rows[i].algorithm);
    CHECK(a.rows[i].mean_srr == b.rows[i].mean_srr);
    CHECK(a.rows[i].nmse == b.rows[i].nmse);
    CHECK(a.rows[i].mean_iters == b.rows[i].mean_iters);
  }
}

TEST_CASE("scenario draws do not depend on the algorithm set") {
  ExperimentConfig all = small_experiment();
  ExperimentConfig oracle_only = small_experiment();
  oracle_only.run_emep = oracle_only.run_admm = oracle_only.run_irw = false;
  ResultTable a = run_experiment(all);
  ResultTable b = run_experiment(oracle_only);
  double nmse_all = 0, nmse_oracle = 0;
  for (const auto& r : a.rows)
    if (r.algorithm == "oracle_mmse") nmse_all = r.nmse;
  for (const auto& r : b.rows)
    if (r.algorithm == "oracle_mmse") nmse_oracle = r.nmse;
  CHECK(nmse_all == nmse_oracle);
}

TEST_CASE("single oracle trial in the near-noiseless regime") {
  ExperimentConfig cfg = small_experiment();
  cfg.run_emep = cfg.run_admm = cfg.run_irw = false;
  cfg.scenario.snr_db = 120.0;
  cfg.trials = 1;
  ResultTable t = run_experiment(cfg);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].nmse < 1e-6);
  CHECK(t.rows[0].failures == 0);
}

TEST_CASE("output files are written, reparse, and reproduce bytes") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = small_experiment();
  cfg.trials = 2;
  cfg.axis = SweepAxis::TauP;
  cfg.sweep_values = {8, 10};
  std::string dir = (fs::temp_directory_path() / "juice_test_out").string();
  fs::remove_all(dir);

  ResultTable t = run_experiment(cfg);
  emit_outputs(t, cfg, dir);
  CHECK(fs::exists(dir + "/results.csv"));
  CHECK(fs::exists(dir + "/results.json"));
  CHECK(fs::exists(dir + "/timings.csv"));
  CHECK(fs::exists(dir + "/plot_tau_p_srr.dat"));
  CHECK(fs::exists(dir + "/plot_tau_p_nmse.dat"));

  // reparse round trip
  auto rows = parse_results_csv(dir + "/results.csv");
  REQUIRE(rows.size() == t.rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].algorithm == t.rows[i].algorithm);
    CHECK(rows[i].sweep_value == t.rows[i].sweep_value);
    CHECK(rows[i].nmse == t.rows[i].nmse);
    CHECK(rows[i].mean_srr == t.rows[i].mean_srr);
  }

  // byte-identical on a rerun
  std::string csv1 = read_file(dir + "/results.csv");
  ResultTable t2 = run_experiment(cfg);
  std::string dir2 = dir + "_b";
  fs::remove_all(dir2);
  emit_outputs(t2, cfg, dir2);
  std::string csv2 = read_file(dir2 + "/results.csv");
  CHECK(csv1 == csv2);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("grid search selects the better point") {
  ExperimentConfig cfg = small_experiment();
  cfg.run_emep = cfg.run_admm = cfg.run_oracle = false;
  cfg.trials = 3;

  // singleton grid returns the point
  json single = {{"irw_l21", {{"lambda", {0.1}}}}};
  GridSearchResult g1 = grid_search(cfg, single);
  CHECK(g1.best.at("irw_l21").at("lambda").get<double>() == Approx(0.1));

  // a huge lambda (all-zero estimate, nmse 1) never beats a sane one
  json grid = {{"irw_l21", {{"lambda", {1e7, 0.1}}}}};
  GridSearchResult g2 = grid_search(cfg, grid);
  CHECK(g2.best.at("irw_l21").at("lambda").get<double>() == Approx(0.1));
  CHECK(g2.points.size() == 2);

  // ordering invariance
  json flipped = {{"irw_l21", {{"lambda", {0.1, 1e7}}}}};
  GridSearchResult g3 = grid_search(cfg, flipped);
  CHECK(g3.best.at("irw_l21").at("lambda").get<double>() == Approx(0.1));
}
