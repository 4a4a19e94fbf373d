#pragma once

#include <vector>

#include "juice/common.hpp"
#include "juice/gaussian.hpp"
#include "juice/model.hpp"

namespace juice {

struct EmEpConfig {
  double epsilon = 0.1;      // prior probability a cluster is active
  double d = 1.0;            // inverse-Wishart exponent
  double eta = 0.9;          // site damping in natural parameters; 1 = undamped
  double eps_thr = 1e-3;     // gate posterior below this prunes the cluster
  double theta_act = 0.05;   // relative column-energy threshold for support
  double eps_stp = 3e-3;     // relative Frobenius stopping tolerance
  int k_max = 30;
  double sigma_init2 = 1e6;  // near-flat initial site covariance
  bool update_hyperparams = true;
  bool trace = false;

  void validate() const {
    if (epsilon <= 0 || epsilon >= 1) throw ConfigError("epsilon must lie in (0, 1)");
    if (d <= 0) throw ConfigError("d must be > 0");
    if (eta <= 0 || eta > 1) throw ConfigError("eta must lie in (0, 1]");
    if (k_max < 1) throw ConfigError("k_max must be >= 1");
  }
};

struct HyperParams {
  RVec gamma_bar;            // per-UE sparsity scale
  std::vector<CMat> R_bar;   // per-cluster correlation structure
  double epsilon = 0.1;
  double d = 1.0;
};

struct EmEpTraceRecord {
  int iter = 0;
  double frob_change = 0.0;
  int live_clusters = 0;
};

struct EmEpResult {
  CMat X_hat;
  std::vector<int> support;
  RVec gate_post;
  HyperParams hyper;
  int iterations = 0;
  int skipped_updates = 0;  // cluster updates abandoned after repair failure
  std::vector<EmEpTraceRecord> trace;
};

struct EpState {
  // fixed problem data
  CMat Gram;   // Phi^H Phi
  CMat PM;     // Y^T conj(Phi); column i times 1/sigma2 is UE i's data term
  double sigma2 = 1.0;
  std::vector<std::vector<int>> clusters;
  std::vector<int> cluster_of;
  std::vector<CMat> B;
  int M = 0;
  int N = 0;
  EmEpConfig cfg;

  // sites in natural parameters (may be improper)
  std::vector<CMat> site_prec;
  std::vector<CVec> site_h;

  // global marginals; zero for pruned UEs
  std::vector<CVec> m;
  std::vector<CMat> Sigma;

  RVec gate_post;
  HyperParams hyper;
  std::vector<char> live;
  int skipped_updates = 0;

  bool ue_live(int i) const { return live[cluster_of[i]] != 0; }

  std::vector<int> live_ues() const {
    std::vector<int> out;
    for (size_t l = 0; l < clusters.size(); ++l)
      if (live[l]) out.insert(out.end(), clusters[l].begin(), clusters[l].end());
    return out;
  }

  int live_cluster_count() const {
    int c = 0;
    for (char v : live) c += (v != 0);
    return c;
  }

  CMat mean_matrix() const {
    CMat X = CMat::Zero(M, N);
    for (int i = 0; i < N; ++i)
      if (ue_live(i) && m[i].size() == M) X.col(i) = m[i];
    return X;
  }
};

inline EpState init_state(const CMat& Y, const CMat& Phi, double sigma2,
                          const PriorInfo& prior, const EmEpConfig& cfg) {
  cfg.validate();
  if (sigma2 <= 0) throw ConfigError("sigma2 must be > 0");
  if (Y.rows() != Phi.rows()) throw DimensionError("init_state: Y/Phi row mismatch");

  EpState st;
  st.cfg = cfg;
  st.sigma2 = sigma2;
  st.M = static_cast<int>(Y.cols());
  st.N = static_cast<int>(Phi.cols());
  st.clusters = prior.clusters;
  st.B = prior.B;
  st.cluster_of.assign(st.N, -1);
  for (size_t l = 0; l < st.clusters.size(); ++l)
    for (int i : st.clusters[l]) st.cluster_of[i] = static_cast<int>(l);

  st.Gram = Phi.adjoint() * Phi;
  st.PM = Y.transpose() * Phi.conjugate();

  st.site_prec.assign(st.N, CMat::Identity(st.M, st.M) / cfg.sigma_init2);
  st.site_h.assign(st.N, CVec::Zero(st.M));
  st.m.assign(st.N, CVec::Zero(st.M));
  st.Sigma.assign(st.N, CMat::Zero(st.M, st.M));

  st.hyper.gamma_bar = RVec::Ones(st.N);
  st.hyper.R_bar = prior.B;
  st.hyper.epsilon = cfg.epsilon;
  st.hyper.d = cfg.d;
  st.gate_post = RVec::Constant(st.clusters.size(), cfg.epsilon);
  st.live.assign(st.clusters.size(), 1);
  return st;
}

/// Rebuilds every live marginal from the joint system
///   P = (1/sigma2) Gram_live (x) I_M + blockdiag(site precisions).
/// One dense Hermitian solve of dimension (live N) * M.
inline void global_refresh(EpState& st) {
  std::vector<int> idx = st.live_ues();
  const int n = static_cast<int>(idx.size());
  if (n == 0) return;
  const int M = st.M;
  const int dim = n * M;
  const double w = 1.0 / st.sigma2;

  CMat P = CMat::Zero(dim, dim);
  CVec rhs(dim);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      Complex g = w * st.Gram(idx[a], idx[b]);
      for (int k = 0; k < M; ++k) P(a * M + k, b * M + k) = g;
    }
    P.block(a * M, a * M, M, M) += st.site_prec[idx[a]];
    rhs.segment(a * M, M) = w * st.PM.col(idx[a]) + st.site_h[idx[a]];
  }

  Eigen::LLT<CMat> llt(P);
  if (llt.info() != Eigen::Success) {
    P += 1e-9 * CMat::Identity(dim, dim);
    llt.compute(P);
    if (llt.info() != Eigen::Success)
      throw NumericalError("global_refresh: joint precision not positive definite");
  }
  CMat cov = llt.solve(CMat::Identity(dim, dim));
  CVec mean = llt.solve(rhs);
  for (int a = 0; a < n; ++a) {
    st.Sigma[idx[a]] = hermitize(cov.block(a * M, a * M, M, M));
    st.m[idx[a]] = mean.segment(a * M, M);
  }
}

namespace detail {

/// Escalating diagonal loading: zeta = 1e-6, x10 per attempt, at most 6
/// attempts. Returns false when the matrix stays indefinite.
inline bool repair_psd(CMat& a, double floor_eig = 1e-13) {
  double lam = min_eigenvalue(a);
  if (lam > floor_eig) return true;
  double zeta = 1e-6;
  for (int attempt = 0; attempt < 6; ++attempt, zeta *= 10.0) {
    CMat cand = a + zeta * CMat::Identity(a.rows(), a.cols());
    if (min_eigenvalue(cand) > floor_eig) {
      a = cand;
      return true;
    }
  }
  return false;
}

}  // namespace detail

struct CavityCluster {
  bool ok = false;
  std::vector<CVec> m_hat;
  std::vector<CMat> Sigma_hat;
  std::vector<CMat> prec;  // Sigma_hat^{-1} after any repair
  std::vector<CVec> h;     // prec * m_hat
};

/// Removes cluster l's site factors from the global marginals (the Gaussian
/// quotient in natural parameters), with PSD repair on failure.
inline CavityCluster cavity(int l, const EpState& st) {
  CavityCluster out;
  const auto& cl = st.clusters[l];
  out.m_hat.resize(cl.size());
  out.Sigma_hat.resize(cl.size());
  out.prec.resize(cl.size());
  out.h.resize(cl.size());
  for (size_t j = 0; j < cl.size(); ++j) {
    int i = cl[j];
    CMat marg_prec;
    try {
      marg_prec = inverse_hermitian(st.Sigma[i]);
    } catch (const NumericalError&) {
      return out;  // marginal unusable; skip the cluster this sweep
    }
    CMat cav_prec = hermitize(marg_prec - st.site_prec[i]);
    CVec cav_h = marg_prec * st.m[i] - st.site_h[i];

    Eigen::SelfAdjointEigenSolver<CMat> es(cav_prec);
    const double lam_min = es.eigenvalues().minCoeff();
    const double lam_abs_min = es.eigenvalues().cwiseAbs().minCoeff();
    CMat sigma_hat;
    if (lam_min > 1e-13) {
      sigma_hat = hermitize(es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().adjoint());
    } else if (lam_abs_min > 1e-13) {
      // invertible but indefinite: repair the covariance directly
      sigma_hat = hermitize(es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().adjoint());
      if (!detail::repair_psd(sigma_hat)) return out;
      cav_prec = inverse_hermitian(sigma_hat);
    } else {
      // singular precision difference: load the precision instead
      if (!detail::repair_psd(cav_prec)) return out;
      sigma_hat = inverse_hermitian(cav_prec);
    }
    out.Sigma_hat[j] = hermitize(sigma_hat);
    out.prec[j] = hermitize(cav_prec);
    out.m_hat[j] = out.Sigma_hat[j] * cav_h;
    out.h[j] = out.prec[j] * out.m_hat[j];
  }
  out.ok = true;
  return out;
}

struct ClusterNormalizer {
  double log_a = 0.0;
  double log_b = 0.0;
  double log_g = 0.0;
};

inline ClusterNormalizer cluster_normalizer(int l, const CavityCluster& cav,
                                            const EpState& st) {
  const auto& cl = st.clusters[l];
  const double eps = st.hyper.epsilon;
  ClusterNormalizer out;
  out.log_b = std::log1p(-eps);
  out.log_a = std::log(eps);
  for (size_t j = 0; j < cl.size(); ++j) {
    int i = cl[j];
    CMat slab_cov = cav.Sigma_hat[j] + st.hyper.gamma_bar(i) * st.hyper.R_bar[l];
    out.log_b += log_density(CVec::Zero(st.M), cav.m_hat[j], cav.Sigma_hat[j]);
    out.log_a += log_density(CVec::Zero(st.M), cav.m_hat[j], slab_cov);
  }
  out.log_g = logsumexp2(out.log_a, out.log_b);
  return out;
}

struct TiltedMoments {
  double e_c = 0.0;  // gate posterior E[c_l]
  std::vector<CVec> mean;
  std::vector<CMat> var;
};

/// First and second central moments of the tilted distribution: a two
/// component mixture of a point mass at zero and the slab posterior.
inline TiltedMoments tilted_moments(int l, const CavityCluster& cav,
                                    const EpState& st,
                                    const ClusterNormalizer& logs) {
  const auto& cl = st.clusters[l];
  TiltedMoments out;
  out.e_c = std::exp(logs.log_a - logs.log_g);
  const double w = out.e_c;
  out.mean.resize(cl.size());
  out.var.resize(cl.size());
  for (size_t j = 0; j < cl.size(); ++j) {
    int i = cl[j];
    CMat R = st.hyper.gamma_bar(i) * st.hyper.R_bar[l];
    CMat A = R + cav.Sigma_hat[j];
    CMat Ainv_m = solve_hermitian(A, cav.m_hat[j]);
    CVec mu = R * Ainv_m;
    CMat C = hermitize(R * solve_hermitian(A, cav.Sigma_hat[j]));
    out.mean[j] = w * mu;
    out.var[j] = hermitize(w * C + (w * (1.0 - w)) * (mu * mu.adjoint()));
  }
  return out;
}

/// Moment matching: the new site is the tilted distribution divided by the
/// cavity, blended into the old site in natural parameters.
inline bool update_site(int l, const TiltedMoments& tilted,
                        const CavityCluster& cav, EpState& st) {
  const auto& cl = st.clusters[l];
  const double eta = st.cfg.eta;
  std::vector<CMat> new_prec(cl.size());
  std::vector<CVec> new_h(cl.size());
  for (size_t j = 0; j < cl.size(); ++j) {
    CMat V = tilted.var[j];
    // the 1e-8 floor caps pinned-to-zero site precisions so the joint
    // refresh stays within double-precision conditioning
    if (!detail::repair_psd(V, 1e-8)) return false;
    CMat Vinv = inverse_hermitian(V);
    new_prec[j] = hermitize(Vinv - cav.prec[j]);
    new_h[j] = Vinv * tilted.mean[j] - cav.h[j];
  }
  for (size_t j = 0; j < cl.size(); ++j) {
    int i = cl[j];
    st.site_prec[i] = hermitize((1.0 - eta) * st.site_prec[i] + eta * new_prec[j]);
    st.site_h[i] = (1.0 - eta) * st.site_h[i] + eta * new_h[j];
  }
  st.gate_post(l) = tilted.e_c;
  return true;
}

/// Closed-form hyper-parameter updates: per-UE sparsity scale, then one
/// shared correlation matrix per cluster.
inline void m_step(EpState& st) {
  const int M = st.M;
  for (size_t l = 0; l < st.clusters.size(); ++l) {
    if (!st.live[l]) continue;
    const auto& cl = st.clusters[l];
    const double L = static_cast<double>(cl.size());
    CMat acc = CMat::Zero(M, M);
    for (int i : cl) {
      CMat S = st.m[i] * st.m[i].adjoint() + st.Sigma[i];
      double g = std::real(solve_hermitian(st.hyper.R_bar[l], S).trace()) / M;
      st.hyper.gamma_bar(i) = std::max(g, 0.0);
      acc += S / std::max(st.hyper.gamma_bar(i), 1e-10);
    }
    st.hyper.R_bar[l] =
        hermitize((acc + L * st.B[l]) / (L + L * st.hyper.d));
  }
}

/// Masks out clusters whose gate posterior fell below the threshold; their
/// channel estimates are fixed to zero from here on.
inline void prune(EpState& st, double eps_thr) {
  for (size_t l = 0; l < st.clusters.size(); ++l) {
    if (!st.live[l]) continue;
    if (st.gate_post(l) < eps_thr) {
      st.live[l] = 0;
      for (int i : st.clusters[l]) {
        st.m[i].setZero();
        st.Sigma[i].setZero();
      }
    }
  }
}

inline std::vector<int> emep_support(const EpState& st, double theta_act) {
  double max_energy = 0.0;
  for (int i = 0; i < st.N; ++i)
    if (st.ue_live(i)) max_energy = std::max(max_energy, st.m[i].squaredNorm());
  std::vector<int> sup;
  if (max_energy <= 0.0) return sup;
  for (int i = 0; i < st.N; ++i)
    if (st.ue_live(i) && st.m[i].squaredNorm() >= theta_act * max_energy)
      sup.push_back(i);
  return sup;
}

inline EmEpResult run_em_ep(const CMat& Y, const CMat& Phi, double sigma2,
                            const PriorInfo& prior, const EmEpConfig& cfg) {
  EpState st = init_state(Y, Phi, sigma2, prior, cfg);
  global_refresh(st);
  CMat prev = st.mean_matrix();

  EmEpResult res;
  for (int k = 1; k <= cfg.k_max; ++k) {
    for (size_t l = 0; l < st.clusters.size(); ++l) {
      if (!st.live[l]) continue;
      CavityCluster cav = cavity(static_cast<int>(l), st);
      if (!cav.ok) {
        ++st.skipped_updates;
        continue;
      }
      ClusterNormalizer logs = cluster_normalizer(static_cast<int>(l), cav, st);
      TiltedMoments tm = tilted_moments(static_cast<int>(l), cav, st, logs);
      if (!update_site(static_cast<int>(l), tm, cav, st)) ++st.skipped_updates;
    }
    global_refresh(st);
    if (cfg.update_hyperparams) m_step(st);
    prune(st, cfg.eps_thr);

    CMat X = st.mean_matrix();
    double change = (X - prev).norm();
    res.iterations = k;
    if (cfg.trace)
      res.trace.push_back({k, change, st.live_cluster_count()});
    prev = X;
    if (change < cfg.eps_stp * std::max(X.norm(), 1e-30)) break;
  }

  res.support = emep_support(st, cfg.theta_act);
  res.X_hat = CMat::Zero(st.M, st.N);
  for (int i : res.support) res.X_hat.col(i) = st.m[i];
  res.gate_post = st.gate_post;
  res.hyper = st.hyper;
  res.skipped_updates = st.skipped_updates;
  return res;
}

}  // namespace juice
