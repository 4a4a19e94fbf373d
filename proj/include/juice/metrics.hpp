#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "juice/common.hpp"

namespace juice {

/// Denominator convention for the support recovery rate. MissedOnly counts
/// |S \ S_hat| (as printed in the defining formula); FalseAlarms counts
/// |S_hat \ S| instead.
enum class SrrConvention { MissedOnly, FalseAlarms };

inline double srr(const std::vector<int>& s_true, const std::vector<int>& s_hat,
                  int K, SrrConvention conv = SrrConvention::MissedOnly) {
  if (K <= 0) throw MetricError("srr: undefined for K = 0");
  std::set<int> st(s_true.begin(), s_true.end());
  std::set<int> sh(s_hat.begin(), s_hat.end());
  int hits = 0;
  for (int i : sh)
    if (st.count(i)) ++hits;
  int missed = static_cast<int>(st.size()) - hits;
  int false_alarms = static_cast<int>(sh.size()) - hits;
  int extra = (conv == SrrConvention::MissedOnly) ? missed : false_alarms;
  return static_cast<double>(hits) / static_cast<double>(extra + K);
}

/// { i : ||x_i|| >= theta_rel * max_j ||x_j|| }; empty for an all-zero input.
inline std::vector<int> detect_support(const CMat& X_hat, double theta_rel) {
  std::vector<int> out;
  RVec norms(X_hat.cols());
  for (int i = 0; i < X_hat.cols(); ++i) norms(i) = X_hat.col(i).norm();
  double mx = norms.size() ? norms.maxCoeff() : 0.0;
  if (mx <= 0.0) return out;
  for (int i = 0; i < X_hat.cols(); ++i)
    if (norms(i) >= theta_rel * mx) out.push_back(i);
  return out;
}

/// Accumulates squared errors across trials; nmse() is the ratio of the
/// accumulated expectations, not the mean of per-trial ratios.
struct NmseAccumulator {
  double num = 0.0;
  double den = 0.0;
  std::vector<double> per_trial;  // per-trial ratios, kept for reporting

  void add(const CMat& X, const CMat& X_hat) {
    double n = (X - X_hat).squaredNorm();
    double d = X.squaredNorm();
    num += n;
    den += d;
    if (d > 0) per_trial.push_back(n / d);
  }

  double nmse() const {
    if (den <= 0) throw MetricError("nmse: zero denominator");
    return num / den;
  }

  double mean_of_ratios() const {
    if (per_trial.empty()) throw MetricError("nmse: no trials");
    double s = 0;
    for (double r : per_trial) s += r;
    return s / per_trial.size();
  }
};

struct TrialMetrics {
  double srr = 0.0;
  double nmse_num = 0.0;
  double nmse_den = 0.0;
  std::vector<int> support_true;
  std::vector<int> support_est;
  int iters = 0;
  double wall_time = 0.0;
};

}  // namespace juice
