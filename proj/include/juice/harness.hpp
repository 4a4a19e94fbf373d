#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "juice/admm.hpp"
#include "juice/baselines.hpp"
#include "juice/common.hpp"
#include "juice/emep.hpp"
#include "juice/metrics.hpp"
#include "juice/model.hpp"

namespace juice {

using json = nlohmann::json;

enum class SweepAxis { TauP, SnrDb, M, None };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::TauP: return "tau_p";
    case SweepAxis::SnrDb: return "snr_db";
    case SweepAxis::M: return "M";
    default: return "none";
  }
}

struct ExperimentConfig {
  ScenarioConfig scenario;

  bool run_emep = true;
  bool run_admm = true;
  bool run_irw = true;
  bool run_oracle = true;
  EmEpConfig emep;
  AdmmConfig admm;
  IrwConfig irw;

  SweepAxis axis = SweepAxis::None;
  std::vector<double> sweep_values;
  int trials = 100;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  int threads = 0;  // 0 = hardware concurrency
  SrrConvention srr_conv = SrrConvention::MissedOnly;

  void validate() const {
    scenario.validate();
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (axis != SweepAxis::None && sweep_values.empty())
      throw ConfigError("sweep values must be nonempty when an axis is set");
  }
};

inline void apply_sweep(ScenarioConfig& cfg, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::TauP: cfg.tau_p = static_cast<int>(std::lround(value)); break;
    case SweepAxis::SnrDb: cfg.snr_db = value; break;
    case SweepAxis::M: cfg.M = static_cast<int>(std::lround(value)); break;
    case SweepAxis::None: break;
  }
}

// ---------------------------------------------------------------------------
// JSON binding (missing keys keep defaults)

namespace detail {
template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace detail

inline void apply_params(const json& j, ScenarioConfig& c) {
  using detail::get_if;
  get_if(j, "N", c.N);
  get_if(j, "N_c", c.N_c);
  get_if(j, "L", c.L);
  get_if(j, "M", c.M);
  get_if(j, "tau_p", c.tau_p);
  get_if(j, "K", c.K);
  if (j.contains("activity_mode")) {
    std::string m = j.at("activity_mode").get<std::string>();
    if (m == "clustered") c.activity_mode = ActivityMode::Clustered;
    else if (m == "independent") c.activity_mode = ActivityMode::Independent;
    else throw ConfigError("activity_mode must be 'clustered' or 'independent'");
  }
  get_if(j, "active_clusters", c.active_clusters);
  get_if(j, "per_cluster_active", c.per_cluster_active);
  get_if(j, "snr_db", c.snr_db);
  get_if(j, "angular_spread_deg", c.angular_spread_deg);
  get_if(j, "angle_jitter_deg", c.angle_jitter_deg);
  get_if(j, "cov_mismatch", c.cov_mismatch);
  get_if(j, "seed", c.seed);
}

inline void apply_params(const json& j, EmEpConfig& c) {
  using detail::get_if;
  get_if(j, "epsilon", c.epsilon);
  get_if(j, "d", c.d);
  get_if(j, "eta", c.eta);
  get_if(j, "eps_thr", c.eps_thr);
  get_if(j, "theta_act", c.theta_act);
  get_if(j, "eps_stp", c.eps_stp);
  get_if(j, "k_max", c.k_max);
  get_if(j, "sigma_init2", c.sigma_init2);
  get_if(j, "update_hyperparams", c.update_hyperparams);
}

inline void apply_params(const json& j, AdmmConfig& c) {
  using detail::get_if;
  get_if(j, "beta1", c.beta1);
  get_if(j, "beta2", c.beta2);
  get_if(j, "beta3", c.beta3);
  get_if(j, "rho", c.rho);
  get_if(j, "eps0", c.eps0);
  get_if(j, "eps_thr", c.eps_thr);
  get_if(j, "eps_stp", c.eps_stp);
  get_if(j, "K_c", c.K_c);
  get_if(j, "k_c_max", c.k_c_max);
  get_if(j, "k_u_max", c.k_u_max);
  get_if(j, "d", c.d);
  get_if(j, "relative_thr", c.relative_thr);
  get_if(j, "precision_form", c.precision_form);
  get_if(j, "clamp_alpha", c.clamp_alpha);
}

inline void apply_params(const json& j, IrwConfig& c) {
  using detail::get_if;
  get_if(j, "lambda", c.lambda);
  get_if(j, "eps0", c.eps0);
  get_if(j, "rho", c.rho);
  get_if(j, "eps_thr", c.eps_thr);
  get_if(j, "eps_stp", c.eps_stp);
  get_if(j, "k_max", c.k_max);
}

inline ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("scenario")) apply_params(j.at("scenario"), cfg.scenario);
  if (j.contains("algorithms")) {
    const json& a = j.at("algorithms");
    cfg.run_emep = a.contains("emep");
    cfg.run_admm = a.contains("corr_map_admm");
    cfg.run_irw = a.contains("irw_l21");
    cfg.run_oracle = a.contains("oracle_mmse");
    if (cfg.run_emep) apply_params(a.at("emep"), cfg.emep);
    if (cfg.run_admm) apply_params(a.at("corr_map_admm"), cfg.admm);
    if (cfg.run_irw) apply_params(a.at("irw_l21"), cfg.irw);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    std::string axis = s.value("axis", "none");
    if (axis == "tau_p") cfg.axis = SweepAxis::TauP;
    else if (axis == "snr_db") cfg.axis = SweepAxis::SnrDb;
    else if (axis == "M") cfg.axis = SweepAxis::M;
    else if (axis == "none") cfg.axis = SweepAxis::None;
    else throw ConfigError("sweep axis must be tau_p, snr_db, M, or none");
    if (s.contains("values"))
      cfg.sweep_values = s.at("values").get<std::vector<double>>();
  }
  detail::get_if(j, "trials", cfg.trials);
  detail::get_if(j, "master_seed", cfg.master_seed);
  detail::get_if(j, "output_dir", cfg.output_dir);
  detail::get_if(j, "threads", cfg.threads);
  if (j.contains("srr_convention")) {
    std::string s = j.at("srr_convention").get<std::string>();
    if (s == "missed") cfg.srr_conv = SrrConvention::MissedOnly;
    else if (s == "false_alarms") cfg.srr_conv = SrrConvention::FalseAlarms;
    else throw ConfigError("srr_convention must be 'missed' or 'false_alarms'");
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_experiment_config(j);
}

inline json echo_config(const ExperimentConfig& c) {
  json a;
  if (c.run_emep)
    a["emep"] = {{"epsilon", c.emep.epsilon}, {"d", c.emep.d},
                 {"eta", c.emep.eta}, {"eps_thr", c.emep.eps_thr},
                 {"theta_act", c.emep.theta_act}, {"eps_stp", c.emep.eps_stp},
                 {"k_max", c.emep.k_max}, {"sigma_init2", c.emep.sigma_init2},
                 {"update_hyperparams", c.emep.update_hyperparams}};
  if (c.run_admm)
    a["corr_map_admm"] = {{"beta1", c.admm.beta1}, {"beta2", c.admm.beta2},
                          {"beta3", c.admm.beta3}, {"rho", c.admm.rho},
                          {"eps0", c.admm.eps0}, {"eps_thr", c.admm.eps_thr},
                          {"eps_stp", c.admm.eps_stp}, {"K_c", c.admm.K_c},
                          {"k_c_max", c.admm.k_c_max}, {"k_u_max", c.admm.k_u_max},
                          {"d", c.admm.d}, {"relative_thr", c.admm.relative_thr},
                          {"precision_form", c.admm.precision_form},
                          {"clamp_alpha", c.admm.clamp_alpha}};
  if (c.run_irw)
    a["irw_l21"] = {{"lambda", c.irw.lambda}, {"eps0", c.irw.eps0},
                    {"rho", c.irw.rho}, {"eps_thr", c.irw.eps_thr},
                    {"eps_stp", c.irw.eps_stp}, {"k_max", c.irw.k_max}};
  if (c.run_oracle) a["oracle_mmse"] = json::object();

  const ScenarioConfig& s = c.scenario;
  json sc = {{"N", s.N}, {"N_c", s.N_c}, {"L", s.L}, {"M", s.M},
             {"tau_p", s.tau_p}, {"K", s.K},
             {"activity_mode",
              s.activity_mode == ActivityMode::Clustered ? "clustered"
                                                         : "independent"},
             {"active_clusters", s.active_clusters},
             {"per_cluster_active", s.per_cluster_active},
             {"snr_db", s.snr_db},
             {"angular_spread_deg", s.angular_spread_deg},
             {"angle_jitter_deg", s.angle_jitter_deg},
             {"cov_mismatch", s.cov_mismatch}, {"seed", s.seed}};
  return json{{"scenario", sc}, {"algorithms", a},
              {"sweep", {{"axis", axis_name(c.axis)}, {"values", c.sweep_values}}},
              {"trials", c.trials}, {"master_seed", c.master_seed},
              {"output_dir", c.output_dir}, {"threads", c.threads}};
}

// ---------------------------------------------------------------------------
// Results

struct TrialRecord {
  bool failed = false;
  double srr = 0.0;
  bool has_srr = false;
  double nmse_num = 0.0;
  double nmse_den = 0.0;
  int iters = 0;
  double wall = 0.0;
};

struct ResultRow {
  double sweep_value = 0.0;
  std::string algorithm;
  int trials = 0;
  int failures = 0;
  double mean_srr = 0.0;
  double srr_stderr = 0.0;
  double nmse = 0.0;
  double nmse_db = 0.0;
  double nmse_mean_ratio = 0.0;
  double mean_iters = 0.0;
  double mean_wall_time = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> warnings;
  // per (sweep index, algorithm) trial records, for downstream statistics
  std::map<std::pair<int, std::string>, std::vector<TrialRecord>> cells;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline ResultRow summarize(double sweep_value, const std::string& name,
                           const std::vector<TrialRecord>& recs) {
  ResultRow row;
  row.sweep_value = sweep_value;
  row.algorithm = name;
  row.trials = static_cast<int>(recs.size());
  double num = 0, den = 0, srr_sum = 0, srr_sq = 0, it_sum = 0, wall_sum = 0,
         ratio_sum = 0;
  int ok = 0, srr_n = 0, ratio_n = 0;
  for (const auto& r : recs) {
    if (r.failed) {
      ++row.failures;
      continue;
    }
    ++ok;
    num += r.nmse_num;
    den += r.nmse_den;
    if (r.has_srr) {
      srr_sum += r.srr;
      srr_sq += r.srr * r.srr;
      ++srr_n;
    }
    if (r.nmse_den > 0) {
      ratio_sum += r.nmse_num / r.nmse_den;
      ++ratio_n;
    }
    it_sum += r.iters;
    wall_sum += r.wall;
  }
  row.mean_srr = srr_n ? srr_sum / srr_n : std::nan("");
  if (srr_n > 1) {
    double var = (srr_sq - srr_sum * srr_sum / srr_n) / (srr_n - 1);
    row.srr_stderr = std::sqrt(std::max(var, 0.0) / srr_n);
  }
  row.nmse = den > 0 ? num / den : std::nan("");
  row.nmse_db = den > 0 && num > 0 ? 10.0 * std::log10(num / den) : std::nan("");
  row.nmse_mean_ratio = ratio_n ? ratio_sum / ratio_n : std::nan("");
  row.mean_iters = ok ? it_sum / ok : 0.0;
  row.mean_wall_time = ok ? wall_sum / ok : 0.0;
  return row;
}

}  // namespace detail

inline ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<double> values =
      cfg.axis == SweepAxis::None ? std::vector<double>{0.0} : cfg.sweep_values;

  std::vector<std::pair<std::string, int>> algos;  // name, id
  if (cfg.run_emep) algos.push_back({"emep", 0});
  if (cfg.run_admm) algos.push_back({"corr_map_admm", 1});
  if (cfg.run_irw) algos.push_back({"irw_l21", 2});
  if (cfg.run_oracle) algos.push_back({"oracle_mmse", 3});

  const int S = static_cast<int>(values.size());
  const int T = cfg.trials;
  // records[s][a][t]
  std::vector<std::vector<std::vector<TrialRecord>>> records(
      S, std::vector<std::vector<TrialRecord>>(
             algos.size(), std::vector<TrialRecord>(T)));

  auto run_cell = [&](int s, int t) {
    ScenarioConfig sc_cfg = cfg.scenario;
    apply_sweep(sc_cfg, cfg.axis, values[s]);
    sc_cfg.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(s),
                              static_cast<std::uint64_t>(t));
    Scenario sc = generate_scenario(sc_cfg);
    PriorInfo prior = prior_info(sc);
    const int K = static_cast<int>(sc.activity.support.size());

    for (size_t a = 0; a < algos.size(); ++a) {
      TrialRecord rec;
      auto t0 = std::chrono::steady_clock::now();
      try {
        CMat X_hat;
        std::vector<int> support;
        int iters = 0;
        switch (algos[a].second) {
          case 0: {
            auto r = run_em_ep(sc.Y, sc.Phi, sc.sigma2, prior, cfg.emep);
            X_hat = std::move(r.X_hat);
            support = std::move(r.support);
            iters = r.iterations;
            break;
          }
          case 1: {
            auto r = run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, prior, cfg.admm);
            X_hat = std::move(r.X_hat);
            support = std::move(r.support);
            iters = r.iterations;
            break;
          }
          case 2: {
            auto r = irw_l21(sc.Y, sc.Phi, cfg.irw);
            X_hat = std::move(r.X_hat);
            support = std::move(r.support);
            iters = r.iterations;
            break;
          }
          default: {
            OracleInfo info{sc.activity.support, sc.R_true, sc.p, sc.sigma2};
            X_hat = oracle_mmse(sc.Y, sc.Phi, info);
            support = sc.activity.support;
            iters = 1;
            break;
          }
        }
        rec.nmse_num = (sc.X_true - X_hat).squaredNorm();
        rec.nmse_den = sc.X_true.squaredNorm();
        rec.iters = iters;
        if (K > 0) {
          rec.srr = srr(sc.activity.support, support, K, cfg.srr_conv);
          rec.has_srr = true;
        }
      } catch (const Error&) {
        rec.failed = true;
      }
      rec.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                               t0)
                     .count();
      records[s][a][t] = rec;
    }
  };

  const int total = S * T;
  int nthreads = cfg.threads > 0
                     ? cfg.threads
                     : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, total));
  if (nthreads == 1) {
    for (int k = 0; k < total; ++k) run_cell(k / T, k % T);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < nthreads; ++w)
      pool.emplace_back([&] {
        for (int k = next.fetch_add(1); k < total; k = next.fetch_add(1))
          run_cell(k / T, k % T);
      });
    for (auto& th : pool) th.join();
  }

  ResultTable table;
  for (int s = 0; s < S; ++s) {
    for (size_t a = 0; a < algos.size(); ++a) {
      ResultRow row = detail::summarize(values[s], algos[a].first, records[s][a]);
      if (row.failures > 0 && row.failures * 10 > row.trials) {
        std::ostringstream os;
        os << "cell (" << axis_name(cfg.axis) << "=" << values[s] << ", "
           << algos[a].first << ") had " << row.failures << "/" << row.trials
           << " failed trials";
        table.warnings.push_back(os.str());
      }
      table.cells[{s, algos[a].first}] = records[s][a];
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Output files

inline std::string results_csv_header() {
  return "sweep_value,algorithm,trials,failures,mean_srr,srr_stderr,nmse,"
         "nmse_db,nmse_mean_ratio,mean_iters";
}

inline std::string to_csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << format_double(r.sweep_value) << ',' << r.algorithm << ',' << r.trials
     << ',' << r.failures << ',' << format_double(r.mean_srr) << ','
     << format_double(r.srr_stderr) << ',' << format_double(r.nmse) << ','
     << format_double(r.nmse_db) << ',' << format_double(r.nmse_mean_ratio)
     << ',' << format_double(r.mean_iters);
  return os.str();
}

/// Writes results.csv (deterministic fields), timings.csv (wall clock,
/// inherently run-dependent), results.json, and per-metric plot data.
inline void emit_outputs(const ResultTable& table, const ExperimentConfig& cfg,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  {
    std::ofstream csv(out_dir + "/results.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write results.csv");
    csv << results_csv_header() << '\n';
    for (const auto& r : table.rows) csv << to_csv_line(r) << '\n';
  }
  {
    std::ofstream tim(out_dir + "/timings.csv", std::ios::trunc);
    tim << "sweep_value,algorithm,mean_wall_time\n";
    for (const auto& r : table.rows)
      tim << format_double(r.sweep_value) << ',' << r.algorithm << ','
          << format_double(r.mean_wall_time) << '\n';
  }
  {
    json rows = json::array();
    for (const auto& r : table.rows)
      rows.push_back({{"sweep_value", r.sweep_value},
                      {"algorithm", r.algorithm},
                      {"trials", r.trials},
                      {"failures", r.failures},
                      {"mean_srr", r.mean_srr},
                      {"srr_stderr", r.srr_stderr},
                      {"nmse", r.nmse},
                      {"nmse_db", r.nmse_db},
                      {"nmse_mean_ratio", r.nmse_mean_ratio},
                      {"mean_iters", r.mean_iters},
                      {"mean_wall_time", r.mean_wall_time}});
    json doc = {{"results", rows},
                {"warnings", table.warnings},
                {"config", echo_config(cfg)}};
    std::ofstream js(out_dir + "/results.json", std::ios::trunc);
    js << doc.dump(2) << '\n';
  }
  if (cfg.axis != SweepAxis::None) {
    std::vector<std::string> algos;
    for (const auto& r : table.rows)
      if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end())
        algos.push_back(r.algorithm);
    struct Metric {
      const char* name;
      double ResultRow::*field;
    };
    const Metric metrics[] = {{"srr", &ResultRow::mean_srr},
                              {"nmse", &ResultRow::nmse},
                              {"nmse_db", &ResultRow::nmse_db}};
    for (const auto& m : metrics) {
      std::ofstream dat(out_dir + "/plot_" + axis_name(cfg.axis) + "_" +
                        m.name + ".dat");
      dat << "# " << axis_name(cfg.axis);
      for (const auto& a : algos) dat << ' ' << a;
      dat << '\n';
      std::vector<double> values =
          cfg.axis == SweepAxis::None ? std::vector<double>{0.0} : cfg.sweep_values;
      for (double v : values) {
        dat << format_double(v);
        for (const auto& a : algos) {
          for (const auto& r : table.rows)
            if (r.algorithm == a && r.sweep_value == v) {
              dat << ' ' << format_double(r.*(m.field));
              break;
            }
        }
        dat << '\n';
      }
    }
  }
}

/// Reads back a results.csv written by emit_outputs.
inline std::vector<ResultRow> parse_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != results_csv_header())
    throw IoError("unexpected results.csv header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    ResultRow r;
    std::getline(ss, tok, ','); r.sweep_value = std::strtod(tok.c_str(), nullptr);
    std::getline(ss, r.algorithm, ',');
    std::getline(ss, tok, ','); r.trials = std::stoi(tok);
    std::getline(ss, tok, ','); r.failures = std::stoi(tok);
    std::getline(ss, tok, ','); r.mean_srr = std::strtod(tok.c_str(), nullptr);
    std::getline(ss, tok, ','); r.srr_stderr = std::strtod(tok.c_str(), nullptr);
    std::getline(ss, tok, ','); r.nmse = std::strtod(tok.c_str(), nullptr);
    std::getline(ss, tok, ','); r.nmse_db = std::strtod(tok.c_str(), nullptr);
    std::getline(ss, tok, ','); r.nmse_mean_ratio = std::strtod(tok.c_str(), nullptr);
    std::getline(ss, tok, ','); r.mean_iters = std::strtod(tok.c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridPointResult {
  std::string algorithm;
  json params;
  double nmse = 0.0;
  double mean_srr = 0.0;
};

struct GridSearchResult {
  std::map<std::string, json> best;  // algorithm -> best parameter block
  std::vector<GridPointResult> points;
};

/// Exhaustive search over the cartesian product of each algorithm's value
/// lists, scored by NMSE on a seed stream disjoint from evaluation runs.
inline GridSearchResult grid_search(const ExperimentConfig& base,
                                    const json& grid) {
  GridSearchResult out;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    const std::string& alg = it.key();
    if (alg != "emep" && alg != "corr_map_admm" && alg != "irw_l21")
      throw ConfigError("grid: unknown algorithm " + alg);
    const json& axes = it.value();
    if (!axes.is_object() || axes.empty())
      throw ConfigError("grid for " + alg + " must be a nonempty object");

    std::vector<std::string> keys;
    std::vector<std::vector<json>> vals;
    for (auto a = axes.begin(); a != axes.end(); ++a) {
      keys.push_back(a.key());
      std::vector<json> v;
      for (const auto& x : a.value()) v.push_back(x);
      if (v.empty()) throw ConfigError("grid axis " + a.key() + " is empty");
      vals.push_back(std::move(v));
    }

    std::vector<size_t> idx(keys.size(), 0);
    double best_nmse = std::numeric_limits<double>::infinity();
    json best_point;
    bool done = false;
    while (!done) {
      json point;
      for (size_t k = 0; k < keys.size(); ++k) point[keys[k]] = vals[k][idx[k]];

      ExperimentConfig cfg = base;
      cfg.run_emep = alg == "emep";
      cfg.run_admm = alg == "corr_map_admm";
      cfg.run_irw = alg == "irw_l21";
      cfg.run_oracle = false;
      cfg.axis = SweepAxis::None;
      cfg.sweep_values.clear();
      // held-out seed stream
      cfg.master_seed = splitmix64(base.master_seed ^ 0xA5C0FFEE5EEDULL);
      if (cfg.run_emep) apply_params(point, cfg.emep);
      if (cfg.run_admm) apply_params(point, cfg.admm);
      if (cfg.run_irw) apply_params(point, cfg.irw);

      ResultTable t = run_experiment(cfg);
      GridPointResult gp;
      gp.algorithm = alg;
      gp.params = point;
      gp.nmse = t.rows.at(0).nmse;
      gp.mean_srr = t.rows.at(0).mean_srr;
      out.points.push_back(gp);
      if (gp.nmse < best_nmse) {
        best_nmse = gp.nmse;
        best_point = point;
      }

      done = true;
      for (size_t k = 0; k < idx.size(); ++k) {
        if (++idx[k] < vals[k].size()) {
          done = false;
          break;
        }
        idx[k] = 0;
      }
    }
    out.best[alg] = best_point;
  }
  return out;
}

inline void emit_grid_outputs(const GridSearchResult& g,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);
  std::ofstream csv(out_dir + "/grid_results.csv", std::ios::trunc);
  csv << "algorithm,params,nmse,mean_srr\n";
  for (const auto& p : g.points)
    csv << p.algorithm << ",\"" << p.params.dump() << "\","
        << format_double(p.nmse) << ',' << format_double(p.mean_srr) << '\n';
  json best;
  for (const auto& [k, v] : g.best) best[k] = v;
  std::ofstream js(out_dir + "/grid_best.json", std::ios::trunc);
  js << best.dump(2) << '\n';
}

}  // namespace juice
