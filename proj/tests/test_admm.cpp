#include <catch2/catch_amalgamated.hpp>

#include "juice/admm.hpp"
#include "juice/metrics.hpp"
#include "oracles.hpp"

using namespace juice;
using Catch::Approx;

namespace {

std::vector<std::vector<int>> two_clusters() { return {{0, 1}, {2, 3}}; }

CMat random_spd(Rng& rng, int m, double ridge = 0.3) {
  CMat G = rng.cnormal_matrix(m, m);
  return hermitize(G * G.adjoint()) + ridge * CMat::Identity(m, m);
}

}  // namespace

TEST_CASE("outer MM weights are shared within a cluster") {
  CMat X = CMat::Zero(2, 4);
  RVec q0 = mm_weights_outer(X, two_clusters(), 0.01);
  for (int i = 0; i < 4; ++i) CHECK(q0(i) == Approx(100.0));

  X(0, 0) = 4.0;
  X(0, 1) = 5.0;  // cluster 0 group norm sum = 9
  RVec q = mm_weights_outer(X, two_clusters(), 1.0);
  CHECK(q(0) == Approx(0.1));
  CHECK(q(1) == q(0));
  CHECK(q(2) == Approx(1.0));

  RVec q_scaled = mm_weights_outer(10.0 * X, two_clusters(), 1.0);
  CHECK(q_scaled(0) < q(0));
  CHECK(q_scaled(2) == Approx(q(2)));  // zero-energy cluster unchanged
}

TEST_CASE("inner MM weights are per UE and phase invariant") {
  CMat X = CMat::Zero(2, 3);
  X(0, 1) = Complex(0.0, 4.0);
  RVec g = mm_weights_inner(X, {0, 1}, 1.0);
  CHECK(g(0) == Approx(1.0));
  CHECK(g(1) == Approx(0.2));
  CHECK(g(2) == 0.0);  // outside the detected support

  CMat Xr = X;
  Xr.col(1) *= Complex(std::cos(1.1), std::sin(1.1));
  RVec gr = mm_weights_inner(Xr, {0, 1}, 1.0);
  CHECK(gr(1) == Approx(g(1)));
}

TEST_CASE("Z update limits and closed forms") {
  Rng rng(7);
  const int M = 2, N = 3, tau_p = 5;
  CMat X = rng.cnormal_matrix(M, N);
  CMat Lam = rng.cnormal_matrix(M, N);
  CMat Y = rng.cnormal_matrix(tau_p, M);

  // large rho: Z -> X
  {
    CMat Phi = generate_pilots(tau_p, N, rng);
    double rho = 1e9;
    CMat T = Phi.transpose() * Phi.conjugate();
    CMat gram_inv = inverse_hermitian(T + rho * CMat::Identity(N, N));
    CMat Z = z_update(X, Lam, Y.transpose() * Phi.conjugate(), gram_inv, rho);
    CHECK((Z - X).cwiseAbs().maxCoeff() < 1e-6);
  }

  // real orthonormal pilots, rho = 1, Lam = 0: Z = (X + Y^T Phi)/2
  {
    CMat Phi = CMat::Zero(tau_p, N);
    for (int i = 0; i < N; ++i) Phi(i, i) = 1.0;
    CMat T = Phi.transpose() * Phi.conjugate();
    CMat gram_inv = inverse_hermitian(T + CMat::Identity(N, N));
    CMat Z = z_update(X, CMat::Zero(M, N), Y.transpose() * Phi.conjugate(),
                      gram_inv, 1.0);
    CMat expect = 0.5 * (X + Y.transpose() * Phi.conjugate());
    CHECK((Z - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Z update solves its subproblem") {
  Rng rng(17);
  for (int M : {1, 2, 4}) {
    const int N = 3, tau_p = 4;
    CMat Phi = generate_pilots(tau_p, N, rng);
    CMat Y = rng.cnormal_matrix(tau_p, M);
    CMat X = rng.cnormal_matrix(M, N);
    CMat Lam = rng.cnormal_matrix(M, N);
    double rho = 0.8;
    CMat T = Phi.transpose() * Phi.conjugate();
    CMat gram_inv = inverse_hermitian(T + rho * CMat::Identity(N, N));
    CMat Z = z_update(X, Lam, Y.transpose() * Phi.conjugate(), gram_inv, rho);

    auto obj = [&](const CMat& W) {
      return 0.5 * (Phi * W.transpose() - Y).squaredNorm() +
             0.5 * rho * (X - W + Lam / rho).squaredNorm();
    };
    double base = obj(Z);
    for (int t = 0; t < 100; ++t) {
      CMat pert = Z + 1e-2 * rng.cnormal_matrix(M, N);
      CHECK(obj(pert) >= base - 1e-12);
    }

    // steepest descent on the quadratic, operator form
    CMat Ziter = CMat::Zero(M, N);
    CMat Bmat =
        0.5 * Y.transpose() * Phi.conjugate() + 0.5 * rho * (X + Lam / rho);
    auto apply = [&](const CMat& W) {
      return CMat(0.5 * W * T + 0.5 * rho * W);
    };
    for (int k = 0; k < 800; ++k) {
      CMat R = Bmat - apply(Ziter);
      double rr = R.squaredNorm();
      if (rr < 1e-26) break;
      double denom = std::real((R.conjugate().cwiseProduct(apply(R))).sum());
      Ziter += (rr / denom) * R;
    }
    CHECK((Ziter - Z).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("V update closed forms") {
  Rng rng(27);
  AdmmConfig cfg;
  cfg.rho = 1.0;

  // beta2 = 0 passes x + lambda/rho through
  {
    cfg.beta2 = 0.0;
    CMat X = rng.cnormal_matrix(2, 4);
    CMat Lam = rng.cnormal_matrix(2, 4);
    std::vector<CMat> R = {CMat::Identity(2, 2), CMat::Identity(2, 2)};
    CMat V = v_update(X, Lam, R, two_clusters(), cfg);
    CHECK((V - (X + Lam)).cwiseAbs().maxCoeff() < 1e-12);
  }

  // scalar: beta2=1, W=2 (R = 1/2), rho=1, x=3, lam=0 -> v = 1
  {
    cfg.beta2 = 1.0;
    CMat X = CMat::Zero(1, 1);
    X(0, 0) = 3.0;
    std::vector<CMat> R = {CMat::Constant(1, 1, 0.5)};
    CMat V = v_update(X, CMat::Zero(1, 1), R, {{0}}, cfg);
    CHECK(std::real(V(0, 0)) == Approx(1.0));
  }
}

TEST_CASE("V update solves its subproblem") {
  Rng rng(37);
  AdmmConfig cfg;
  cfg.beta2 = 0.7;
  cfg.rho = 1.3;
  for (int M : {1, 2, 4}) {
    CMat Rcl = random_spd(rng, M);
    CMat X = rng.cnormal_matrix(M, 1);
    CMat Lam = rng.cnormal_matrix(M, 1);
    std::vector<std::vector<int>> cl = {{0}};
    CMat V = v_update(X, Lam, {Rcl}, cl, cfg);

    CMat W = inverse_hermitian(Rcl);
    auto obj = [&](const CVec& v) {
      return cfg.beta2 * std::real(v.dot(W * v)) +
             cfg.rho * (X.col(0) - v + Lam.col(0) / cfg.rho).squaredNorm();
    };
    double base = obj(V.col(0));
    for (int t = 0; t < 100; ++t) {
      CVec pert = V.col(0) + 1e-2 * rng.cnormal_vector(M);
      CHECK(obj(pert) >= base - 1e-12);
    }
    CMat A = cfg.beta2 * W + cfg.rho * CMat::Identity(M, M);
    CVec b = cfg.rho * X.col(0) + Lam.col(0);
    CVec vref = oracles::minimize_quadratic(A, b);
    CHECK((vref - V.col(0)).norm() < 1e-6);
  }
}

TEST_CASE("group shrinkage closed form") {
  double rho = 1.0;
  CMat Z = CMat::Zero(2, 3), V = CMat::Zero(2, 3);
  // C = (Z+V)/2: column norms 1, 3, 2
  Z(0, 0) = 2.0;
  Z(0, 1) = 6.0;
  Z(1, 2) = 4.0;
  RVec alpha(3);
  alpha << 4.0, 2.0, 0.0;  // alpha/(2 rho) = 2, 1, 0
  CMat X = x_update(Z, V, CMat::Zero(2, 3), CMat::Zero(2, 3), alpha, rho);
  CHECK(X.col(0).norm() == 0.0);                      // fully shrunk
  CHECK((X.col(1) - (2.0 / 3.0) * 0.5 * Z.col(1)).norm() < 1e-12);
  CHECK((X.col(2) - 0.5 * Z.col(2)).norm() < 1e-12);  // no penalty

  // negative alpha is a no-op
  RVec neg = RVec::Constant(3, -1.0);
  CMat Xn = x_update(Z, V, CMat::Zero(2, 3), CMat::Zero(2, 3), neg, rho);
  CHECK((Xn - 0.5 * (Z + V)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shrinkage matches a line-search minimizer") {
  Rng rng(57);
  for (int M : {1, 2, 4}) {
    CVec c = rng.cnormal_vector(M);
    double rho = 0.9;
    double a = 0.7 * c.norm() * 2.0 * rho;
    RVec alpha = RVec::Constant(1, a);
    CMat Z(M, 1), Vm = CMat::Zero(M, 1);
    Z.col(0) = 2.0 * c;  // C = (Z+V)/2 = c
    CMat X = x_update(Z, Vm, CMat::Zero(M, 1), CMat::Zero(M, 1), alpha, rho);

    auto obj_t = [&](double t) {
      CVec x = t * c;
      return a * x.norm() + rho * (x - c).squaredNorm();
    };
    double t_star = oracles::golden_section(obj_t, 0.0, 1.5);
    CHECK((X.col(0) - t_star * c).norm() < 1e-6);

    auto obj = [&](const CVec& x) {
      return a * x.norm() + rho * (x - c).squaredNorm();
    };
    double base = obj(X.col(0));
    for (int t = 0; t < 100; ++t) {
      CVec pert = X.col(0) + 1e-2 * rng.cnormal_vector(M);
      CHECK(obj(pert) >= base - 1e-12);
    }
  }
}

TEST_CASE("R update fixed point and stationarity") {
  Rng rng(67);
  AdmmConfig cfg;

  // data-free fixed point: R = B / d
  {
    cfg.beta2 = 0.4;
    cfg.beta3 = 0.2;
    cfg.d = 1.7;
    CMat B = random_spd(rng, 2);
    CMat V = CMat::Zero(2, 3);
    CMat X = CMat::Zero(2, 3);
    RVec q = RVec::Ones(3);
    RVec p = RVec::Ones(3);
    std::vector<std::vector<int>> cl = {{0, 1, 2}};
    RVec mu = mm_scale(X, q, p, cl, cfg);
    auto R = r_update(V, mu, {B}, cl, cfg);
    CHECK((R[0] - B / cfg.d).cwiseAbs().maxCoeff() < 1e-10);
  }

  // finite-difference stationarity of the precision-form objective
  for (int M : {1, 2, 4}) {
    cfg.beta2 = 0.6;
    cfg.beta3 = 0.3;
    cfg.d = 1.1;
    const int L = 3;
    CMat B = random_spd(rng, M);
    CMat V = rng.cnormal_matrix(M, L);
    CMat X = rng.cnormal_matrix(M, L);
    RVec q(L);
    for (int i = 0; i < L; ++i) q(i) = 0.2 + rng.uniform();
    RVec p = RVec::Ones(L);
    std::vector<std::vector<int>> cl = {{0, 1, 2}};
    RVec mu = mm_scale(X, q, p, cl, cfg);
    auto R = r_update(V, mu, {B}, cl, cfg);
    CHECK(is_hermitian(R[0], 1e-10));
    CHECK(min_eigenvalue(R[0]) > 0.0);

    auto obj = [&](const CMat& Rm) {
      CMat Rinv = inverse_hermitian(Rm);
      double f = 0.0;
      for (int i = 0; i < L; ++i)
        f += cfg.beta2 * std::real(V.col(i).dot(Rinv * V.col(i)));
      f += mu(0) * log_det_hermitian(Rm);
      f += cfg.beta3 * L * std::real((B * Rinv).trace());
      return f;
    };
    RVec grad = oracles::fd_gradient_hermitian(obj, R[0], 1e-6);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-5);

    CMat Rmin = oracles::minimize_hermitian_fd(
        obj, R[0] + 0.05 * random_spd(rng, M, 0.0), 300);
    CHECK(obj(R[0]) <= obj(Rmin) + 1e-9);
  }
}

TEST_CASE("dual updates") {
  Rng rng(77);
  CMat X = rng.cnormal_matrix(2, 3);
  CMat V = rng.cnormal_matrix(2, 3);
  CMat Lz = rng.cnormal_matrix(2, 3), Lz0 = Lz;
  CMat Lv = rng.cnormal_matrix(2, 3), Lv0 = Lv;
  dual_update(X, X, V, Lz, Lv, 0.7);
  CHECK((Lz - Lz0).cwiseAbs().maxCoeff() == 0.0);  // X == Z
  CHECK((Lv - (Lv0 + 0.7 * (X - V))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("active cluster detection") {
  auto clusters = two_clusters();
  CMat X = CMat::Zero(2, 4);
  ActiveSet none = detect_active_clusters(X, clusters, 0.05);
  CHECK(none.j.empty());
  CHECK(none.s_hat.empty());

  X(0, 2) = 1.0;
  ActiveSet one = detect_active_clusters(X, clusters, 0.05);
  CHECK(one.j == std::vector<int>{1});
  CHECK(one.s_hat == std::vector<int>{2, 3});

  // twenty clusters, two with energy above the relative threshold
  std::vector<std::vector<int>> big;
  for (int l = 0; l < 20; ++l) big.push_back({2 * l, 2 * l + 1});
  CMat Xb = CMat::Zero(2, 40);
  for (int i = 0; i < 40; ++i) Xb(0, i) = 0.01;
  Xb(0, 5) = 1.0;
  Xb(0, 30) = 0.8;
  ActiveSet two = detect_active_clusters(Xb, big, 0.05);
  CHECK(two.j == std::vector<int>{2, 15});
  CHECK(two.s_hat.size() == 4);
}

TEST_CASE("empty scene collapses to zero") {
  ScenarioConfig c;
  c.N = 8;
  c.N_c = 2;
  c.L = 4;
  c.M = 2;
  c.tau_p = 10;
  c.K = 0;
  c.active_clusters = 0;
  c.per_cluster_active = 0;
  c.snr_db = 60.0;
  c.seed = 12;
  Scenario sc = generate_scenario(c);
  AdmmConfig cfg;
  AdmmResult r = run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, prior_info(sc), cfg);
  CHECK(r.X_hat.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(r.support.empty());
}

TEST_CASE("easy regime support recovery") {
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    ScenarioConfig c;
    c.N = 16;
    c.N_c = 4;
    c.L = 4;
    c.M = 2;
    c.tau_p = 20;
    c.K = 4;
    c.active_clusters = 2;
    c.per_cluster_active = 2;
    c.snr_db = 30.0;
    c.seed = 9000 + seed;
    Scenario sc = generate_scenario(c);
    AdmmConfig cfg;
    // library defaults are tuned for the large clustered setup; this small
    // overdetermined instance wants milder shrinkage
    cfg.beta1 = 0.05;
    cfg.eps0 = 1.0;
    AdmmResult r =
        run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, prior_info(sc), cfg);
    if (r.support == sc.activity.support) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("outer objective is eventually non-increasing") {
  int monotone = 0;
  const int trials = 40;
  for (int seed = 0; seed < trials; ++seed) {
    ScenarioConfig c;
    c.N = 20;
    c.N_c = 5;
    c.L = 4;
    c.M = 2;
    c.tau_p = 12;
    c.K = 4;
    c.active_clusters = 2;
    c.per_cluster_active = 2;
    c.snr_db = 16.0;
    c.seed = 400 + seed;
    Scenario sc = generate_scenario(c);
    AdmmConfig cfg;
    cfg.trace = true;
    AdmmResult r =
        run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, prior_info(sc), cfg);
    bool ok = true;
    for (size_t k = 3; k + 1 < r.trace.size(); ++k) {
      // comparisons across an inner-refinement writeback straddle two
      // different objectives; the outer descent is judged between them
      if (r.trace[k].iter % cfg.K_c == 0) continue;
      double f0 = r.trace[k].objective;
      double f1 = r.trace[k + 1].objective;
      if (f1 > f0 + 1e-8 * std::abs(f0)) ok = false;
    }
    if (ok) ++monotone;
  }
  CHECK(monotone >= static_cast<int>(0.95 * trials));
}

TEST_CASE("primal residuals vanish at convergence") {
  ScenarioConfig c;
  c.N = 16;
  c.N_c = 4;
  c.L = 4;
  c.M = 2;
  c.tau_p = 20;
  c.K = 4;
  c.active_clusters = 2;
  c.per_cluster_active = 2;
  c.snr_db = 30.0;
  c.seed = 31;
  Scenario sc = generate_scenario(c);
  AdmmConfig cfg;
  cfg.beta1 = 0.05;
  cfg.eps0 = 1.0;
  cfg.trace = true;
  cfg.k_c_max = 300;
  cfg.eps_stp = 1e-8;
  AdmmResult r = run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, prior_info(sc), cfg);
  REQUIRE(!r.trace.empty());
  const auto& last = r.trace.back();
  double xn = std::max(r.X_hat.norm(), 1e-12);
  CHECK(last.r_primal_z < 1e-3 * xn);
  CHECK(last.r_primal_v < 1e-3 * xn);
}

TEST_CASE("estimates follow pilot phase rotations exactly") {
  Rng rng(87);
  ScenarioConfig c;
  c.N = 12;
  c.N_c = 3;
  c.L = 4;
  c.M = 2;
  c.tau_p = 8;
  c.K = 4;
  c.active_clusters = 2;
  c.per_cluster_active = 2;
  c.snr_db = 16.0;
  c.seed = 77;
  Scenario sc = generate_scenario(c);
  AdmmConfig cfg;
  cfg.k_c_max = 40;

  CVec phases(c.N);
  for (int i = 0; i < c.N; ++i) {
    double th = rng.uniform(0.0, 2.0 * kPi);
    phases(i) = Complex(std::cos(th), std::sin(th));
  }
  CMat Phi_rot = sc.Phi;
  for (int i = 0; i < c.N; ++i) Phi_rot.col(i) *= std::conj(phases(i));

  PriorInfo pr = prior_info(sc);
  AdmmResult a = run_corr_map_admm(sc.Y, sc.Phi, sc.sigma2, pr, cfg);
  AdmmResult b = run_corr_map_admm(sc.Y, Phi_rot, sc.sigma2, pr, cfg);
  REQUIRE(a.support == b.support);
  for (int i = 0; i < c.N; ++i)
    CHECK((b.X_hat.col(i) - phases(i) * a.X_hat.col(i)).norm() < 1e-8);
}
