#pragma once

#include <vector>

#include "juice/admm.hpp"
#include "juice/common.hpp"

namespace juice {

struct OracleInfo {
  std::vector<int> S_true;
  std::vector<CMat> R_true;  // per-UE, indexed globally
  RVec p;
  double sigma2 = 1.0;
};

/// Bayesian linear estimate on the true support with the true covariances:
///   x_S = (blockdiag((p_i R_i)^{-1}) + (1/s2) Gram_S (x) I_M)^{-1} (1/s2) Th_S^H y.
inline CMat oracle_mmse(const CMat& Y, const CMat& Phi, const OracleInfo& info) {
  const int M = static_cast<int>(Y.cols());
  const int N = static_cast<int>(Phi.cols());
  CMat X = CMat::Zero(M, N);
  const int ns = static_cast<int>(info.S_true.size());
  if (ns == 0) return X;

  // the system is scaled by sigma2 to keep it well conditioned as the noise
  // vanishes: (s2 P_prior + Gram_S (x) I_M) x = Th_S^H y
  const int dim = ns * M;
  CMat P = CMat::Zero(dim, dim);
  CVec rhs(dim);
  CMat YtP = Y.transpose() * Phi.conjugate();
  for (int a = 0; a < ns; ++a) {
    int ia = info.S_true[a];
    for (int b = 0; b < ns; ++b) {
      int ib = info.S_true[b];
      Complex g = Phi.col(ia).dot(Phi.col(ib));
      for (int k = 0; k < M; ++k) P(a * M + k, b * M + k) += g;
    }
    CMat prior_cov = info.p(ia) * info.R_true[ia];
    P.block(a * M, a * M, M, M) +=
        info.sigma2 * inverse_hermitian(prior_cov, 1e-9);
    rhs.segment(a * M, M) = YtP.col(ia);
  }
  Eigen::LLT<CMat> llt(P);
  if (llt.info() != Eigen::Success) {
    P += 1e-9 * CMat::Identity(dim, dim);
    llt.compute(P);
    if (llt.info() != Eigen::Success)
      throw NumericalError("oracle_mmse: system not positive definite");
  }
  CVec sol = llt.solve(rhs);
  for (int a = 0; a < ns; ++a)
    X.col(info.S_true[a]) = sol.segment(a * M, M);
  return X;
}

struct IrwConfig {
  double lambda = 0.2;   // group-norm weight
  double eps0 = 1.0;     // reweighting smoothing
  double rho = 1.0;
  double eps_thr = 0.05; // relative support threshold
  double eps_stp = 1e-3;
  int k_max = 100;
  bool trace = false;
};

struct IrwResult {
  CMat X_hat;
  std::vector<int> support;
  int iterations = 0;
};

/// Iteratively reweighted l2,1 recovery: the two-block ADMM of the main
/// solver with the covariance terms switched off and per-UE weights.
inline IrwResult irw_l21(const CMat& Y, const CMat& Phi, const IrwConfig& cfg) {
  if (cfg.rho <= 0) throw ConfigError("rho must be > 0");
  const int M = static_cast<int>(Y.cols());
  const int N = static_cast<int>(Phi.cols());

  CMat T = Phi.transpose() * Phi.conjugate();
  CMat YtP = Y.transpose() * Phi.conjugate();
  CMat gram_inv = inverse_hermitian(T + cfg.rho * CMat::Identity(N, N));

  // ridge least-squares start, matching the main solver
  CMat X = YtP * gram_inv;
  CMat Z = X;
  CMat Lam_z = CMat::Zero(M, N);
  IrwResult res;
  CMat prev = X;
  for (int k = 1; k <= cfg.k_max; ++k) {
    RVec alpha(N);
    for (int i = 0; i < N; ++i)
      alpha(i) = cfg.lambda / (X.col(i).norm() + cfg.eps0);
    Z = z_update(X, Lam_z, YtP, gram_inv, cfg.rho);
    CMat C = Z - Lam_z / cfg.rho;
    for (int i = 0; i < N; ++i) {
      double nc = C.col(i).norm();
      if (alpha(i) <= 0) {
        X.col(i) = C.col(i);
        continue;
      }
      if (nc <= 0) {
        X.col(i).setZero();
        continue;
      }
      double scale = std::max(0.0, nc - alpha(i) / (2.0 * cfg.rho)) / nc;
      X.col(i) = scale * C.col(i);
    }
    Lam_z += cfg.rho * (X - Z);
    res.iterations = k;
    double change = (X - prev).norm();
    prev = X;
    if (change < cfg.eps_stp * std::max(X.norm(), 1e-30)) break;
  }

  res.X_hat = CMat::Zero(M, N);
  double mx = 0.0;
  for (int i = 0; i < N; ++i) mx = std::max(mx, X.col(i).norm());
  if (mx > 0.0) {
    for (int i = 0; i < N; ++i) {
      if (X.col(i).norm() > cfg.eps_thr * mx) {
        res.support.push_back(i);
        res.X_hat.col(i) = X.col(i);
      }
    }
  }
  return res;
}

}  // namespace juice
