#include <catch2/catch_amalgamated.hpp>

#include "juice/metrics.hpp"
#include "juice/rng.hpp"

using namespace juice;
using Catch::Approx;

TEST_CASE("srr basic cases") {
  std::vector<int> S{1, 2, 3, 4};
  CHECK(srr(S, S, 4) == 1.0);
  CHECK(srr(S, {}, 4) == 0.0);

  // K=16, 12 hits, 4 misses -> 12/20
  std::vector<int> big, est;
  for (int i = 0; i < 16; ++i) big.push_back(i);
  for (int i = 0; i < 12; ++i) est.push_back(i);
  CHECK(srr(big, est, 16) == Approx(0.6));

  CHECK_THROWS_AS(srr({}, {}, 0), MetricError);
}

TEST_CASE("srr conventions differ on false alarms only") {
  std::vector<int> S{0, 1};
  std::vector<int> est{0, 1, 2, 3};
  CHECK(srr(S, est, 2, SrrConvention::MissedOnly) == Approx(1.0));
  CHECK(srr(S, est, 2, SrrConvention::FalseAlarms) == Approx(0.5));
}

TEST_CASE("srr monotonicity") {
  Rng rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    int n = 30;
    std::vector<int> S = rng.sample_without_replacement(n, 8);
    std::vector<int> est = rng.sample_without_replacement(n, 10);
    for (auto conv : {SrrConvention::MissedOnly, SrrConvention::FalseAlarms}) {
      double base = srr(S, est, 8, conv);
      // adding a correct detection never decreases
      for (int i : S) {
        if (std::find(est.begin(), est.end(), i) == est.end()) {
          auto est2 = est;
          est2.push_back(i);
          CHECK(srr(S, est2, 8, conv) >= base - 1e-15);
          break;
        }
      }
      // adding a false alarm never increases
      for (int i = 0; i < n; ++i) {
        if (std::find(S.begin(), S.end(), i) == S.end() &&
            std::find(est.begin(), est.end(), i) == est.end()) {
          auto est2 = est;
          est2.push_back(i);
          CHECK(srr(S, est2, 8, conv) <= base + 1e-15);
          break;
        }
      }
    }
  }
}

TEST_CASE("srr is permutation invariant") {
  Rng rng(99);
  std::vector<int> S{2, 5, 7};
  std::vector<int> est{2, 7, 9};
  double base = srr(S, est, 3);
  // relabel UEs by a fixed permutation
  std::vector<int> perm(20);
  for (int i = 0; i < 20; ++i) perm[i] = (i * 7 + 3) % 20;
  std::vector<int> S2, est2;
  for (int i : S) S2.push_back(perm[i]);
  for (int i : est) est2.push_back(perm[i]);
  CHECK(srr(S2, est2, 3) == Approx(base));
}

TEST_CASE("nmse accumulation") {
  Rng rng(21);
  CMat X = rng.cnormal_matrix(3, 5);
  NmseAccumulator acc;
  acc.add(X, X);
  CHECK(acc.nmse() == 0.0);

  NmseAccumulator zero;
  zero.add(X, CMat::Zero(3, 5));
  CHECK(zero.nmse() == Approx(1.0));

  NmseAccumulator twice;
  twice.add(X, 2.0 * X);
  CHECK(twice.nmse() == Approx(1.0));

  NmseAccumulator empty;
  CHECK_THROWS_AS(empty.nmse(), MetricError);
}

TEST_CASE("nmse is the ratio of sums, not the mean ratio") {
  CMat X1 = CMat::Ones(1, 1);
  CMat X2 = 2.0 * CMat::Ones(1, 1);
  NmseAccumulator acc;
  acc.add(X1, CMat::Zero(1, 1));  // num 1, den 1
  acc.add(X2, X2);                // num 0, den 4
  CHECK(acc.nmse() == Approx(1.0 / 5.0));
  CHECK(acc.mean_of_ratios() == Approx(0.5));
}

TEST_CASE("nmse is unitary invariant") {
  Rng rng(33);
  CMat X = rng.cnormal_matrix(4, 6);
  CMat Xh = rng.cnormal_matrix(4, 6);
  Eigen::HouseholderQR<CMat> qr(rng.cnormal_matrix(4, 4));
  CMat U = qr.householderQ();
  NmseAccumulator a, b;
  a.add(X, Xh);
  b.add(U * X, U * Xh);
  CHECK(a.nmse() == Approx(b.nmse()).epsilon(1e-12));
}

TEST_CASE("support detection thresholds") {
  CMat X = CMat::Zero(2, 4);
  CHECK(detect_support(X, 0.5).empty());

  X(0, 1) = 10.0;
  X(0, 0) = 1.0;
  X(1, 3) = 1.0;
  auto s = detect_support(X, 0.5);
  CHECK(s == std::vector<int>{1});

  auto all = detect_support(X, 1e-12);
  CHECK(all == std::vector<int>{0, 1, 3});
}
