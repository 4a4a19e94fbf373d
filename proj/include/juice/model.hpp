#pragma once

#include <string>
#include <vector>

#include "juice/common.hpp"
#include "juice/rng.hpp"

namespace juice {

enum class ActivityMode { Clustered, Independent };

struct ScenarioConfig {
  int N = 200;     // total UEs
  int N_c = 20;    // clusters
  int L = 10;      // UEs per cluster
  int M = 4;       // BS antennas
  int tau_p = 24;  // pilot length
  int K = 16;      // total active UEs

  ActivityMode activity_mode = ActivityMode::Clustered;
  int active_clusters = 2;
  int per_cluster_active = 8;

  double snr_db = 16.0;
  double angular_spread_deg = 10.0;
  double angle_jitter_deg = 2.0;
  double cov_mismatch = 0.1;  // mixing weight for the B_l prior mismatch
  std::uint64_t seed = 1;

  void validate() const {
    if (N_c < 1 || L < 1) throw ConfigError("N_c and L must be >= 1");
    if (N != L * N_c) throw ConfigError("N must equal L * N_c");
    if (M < 1) throw ConfigError("M must be >= 1");
    if (tau_p < 1) throw ConfigError("tau_p must be >= 1");
    if (K < 0 || K > N) throw ConfigError("K must lie in [0, N]");
    if (angular_spread_deg <= 0) throw ConfigError("angular_spread_deg must be > 0");
    if (cov_mismatch < 0 || cov_mismatch > 1)
      throw ConfigError("cov_mismatch must lie in [0, 1]");
    if (activity_mode == ActivityMode::Clustered) {
      if (active_clusters < 0 || active_clusters > N_c)
        throw ConfigError("active_clusters must lie in [0, N_c]");
      if (per_cluster_active < 0 || per_cluster_active > L)
        throw ConfigError("per_cluster_active must lie in [0, L]");
      if (active_clusters * per_cluster_active != K)
        throw ConfigError("active_clusters * per_cluster_active must equal K");
    }
  }
};

struct ActivityPattern {
  Eigen::VectorXi c;         // cluster gates, length N_c
  Eigen::VectorXi gamma;     // UE activity, length N
  std::vector<int> support;  // { i : gamma_i = 1 }, ascending
};

struct Scenario {
  ScenarioConfig config;
  std::vector<std::vector<int>> clusters;  // index sets C_l, a partition
  std::vector<CMat> R_true;                // per-UE covariance, trace M
  std::vector<CMat> B_prior;               // per-cluster prior matrix
  RVec p;                                  // per-UE transmit power
  CMat Phi;                                // tau_p x N pilots, unit-norm columns
  ActivityPattern activity;
  CMat X_true;  // M x N effective channels
  CMat Y;       // tau_p x M received pilot signal
  double sigma2 = 0.0;
};

/// Spatial covariance of a uniform linear array under a Gaussian local
/// scattering profile, half-wavelength spacing. Trace-normalized to M and
/// eigenvalue-clipped to keep the result PSD.
inline CMat generate_covariance(double nominal_angle_rad, double spread_rad,
                                int M) {
  CMat R(M, M);
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < M; ++n) {
      double delta = kPi * (m - n);
      double phase = delta * std::sin(nominal_angle_rad);
      double damp = 0.5 * spread_rad * spread_rad *
                    std::pow(delta * std::cos(nominal_angle_rad), 2);
      R(m, n) = std::exp(-damp) * Complex(std::cos(phase), std::sin(phase));
    }
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(R));
  RVec lam = es.eigenvalues().cwiseMax(0.0);
  R = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
  R = hermitize(R);
  double tr = R.real().trace();
  if (tr <= 0) throw NumericalError("generate_covariance: nonpositive trace");
  return R * (static_cast<double>(M) / tr);
}

inline ActivityPattern sample_activity(const ScenarioConfig& cfg, Rng& rng) {
  ActivityPattern act;
  act.c = Eigen::VectorXi::Zero(cfg.N_c);
  act.gamma = Eigen::VectorXi::Zero(cfg.N);
  if (cfg.activity_mode == ActivityMode::Clustered) {
    std::vector<int> lead =
        rng.sample_without_replacement(cfg.N_c, cfg.active_clusters);
    for (int l : lead) {
      std::vector<int> within =
          rng.sample_without_replacement(cfg.L, cfg.per_cluster_active);
      for (int j : within) act.gamma(l * cfg.L + j) = 1;
    }
  } else {
    std::vector<int> sel = rng.sample_without_replacement(cfg.N, cfg.K);
    for (int i : sel) act.gamma(i) = 1;
  }
  for (int i = 0; i < cfg.N; ++i) {
    if (act.gamma(i)) {
      act.support.push_back(i);
      act.c(i / cfg.L) = 1;
    }
  }
  return act;
}

/// Entries (+-1 +-j) / sqrt(2 tau_p); columns exactly unit norm.
inline CMat generate_pilots(int tau_p, int N, Rng& rng) {
  if (tau_p < 1) throw ConfigError("tau_p must be >= 1");
  const double s = 1.0 / std::sqrt(2.0 * tau_p);
  CMat Phi(tau_p, N);
  for (int c = 0; c < N; ++c)
    for (int r = 0; r < tau_p; ++r) {
      double re = (rng.bits() & 1) ? s : -s;
      double im = (rng.bits() & 1) ? s : -s;
      Phi(r, c) = Complex(re, im);
    }
  return Phi;
}

/// Active columns drawn CN(0, p_i R_i) through a PSD square-root factor;
/// silent columns exactly zero.
inline CMat sample_channels(const Scenario& sc, Rng& rng) {
  const int M = sc.config.M;
  CMat X = CMat::Zero(M, sc.config.N);
  for (int i : sc.activity.support) {
    CMat F = psd_sqrt(sc.R_true[i]);
    X.col(i) = std::sqrt(sc.p(i)) * (F * rng.cnormal_vector(M));
  }
  return X;
}

inline CMat synthesize_rx(const CMat& Phi, const CMat& X, double sigma2,
                          Rng& rng) {
  if (Phi.cols() != X.cols())
    throw DimensionError("synthesize_rx: Phi/X column mismatch");
  CMat Y = Phi * X.transpose();
  if (sigma2 > 0) {
    double sd = std::sqrt(sigma2);
    for (int c = 0; c < Y.cols(); ++c)
      for (int r = 0; r < Y.rows(); ++r) Y(r, c) += sd * rng.cnormal();
  }
  return Y;
}

inline Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Scenario sc;
  sc.config = cfg;
  sc.sigma2 = std::pow(10.0, -cfg.snr_db / 10.0);

  sc.clusters.resize(cfg.N_c);
  for (int l = 0; l < cfg.N_c; ++l) {
    sc.clusters[l].resize(cfg.L);
    for (int j = 0; j < cfg.L; ++j) sc.clusters[l][j] = l * cfg.L + j;
  }

  const double deg = kPi / 180.0;
  const double spread = cfg.angular_spread_deg * deg;
  sc.R_true.resize(cfg.N);
  sc.p = RVec::Zero(cfg.N);
  std::vector<double> cluster_angle(cfg.N_c);
  for (int l = 0; l < cfg.N_c; ++l)
    cluster_angle[l] = rng.uniform(-60.0 * deg, 60.0 * deg);
  for (int l = 0; l < cfg.N_c; ++l) {
    for (int i : sc.clusters[l]) {
      double jitter = rng.uniform(-cfg.angle_jitter_deg, cfg.angle_jitter_deg) * deg;
      sc.R_true[i] = generate_covariance(cluster_angle[l] + jitter, spread, cfg.M);
      sc.p(i) = cfg.M / sc.R_true[i].real().trace();
    }
  }

  sc.B_prior.resize(cfg.N_c);
  for (int l = 0; l < cfg.N_c; ++l) {
    CMat A = rng.cnormal_matrix(cfg.M, cfg.M);
    CMat Psi = hermitize(A * A.adjoint());
    Psi *= cfg.M / Psi.real().trace();
    CMat avg = CMat::Zero(cfg.M, cfg.M);
    for (int i : sc.clusters[l]) avg += sc.R_true[i];
    avg /= static_cast<double>(cfg.L);
    sc.B_prior[l] = hermitize(cfg.cov_mismatch * Psi + (1.0 - cfg.cov_mismatch) * avg);
  }

  sc.Phi = generate_pilots(cfg.tau_p, cfg.N, rng);
  sc.activity = sample_activity(cfg, rng);
  sc.X_true = sample_channels(sc, rng);
  sc.Y = synthesize_rx(sc.Phi, sc.X_true, sc.sigma2, rng);
  return sc;
}

/// Side information available to the estimators: the cluster layout, the
/// covariance prior matrices, and the per-UE powers. Ground truth stays out.
struct PriorInfo {
  std::vector<std::vector<int>> clusters;
  std::vector<CMat> B;
  RVec p;
};

inline PriorInfo prior_info(const Scenario& sc) {
  return PriorInfo{sc.clusters, sc.B_prior, sc.p};
}

}  // namespace juice
