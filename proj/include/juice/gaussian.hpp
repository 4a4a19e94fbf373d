#pragma once

#include <optional>
#include <utility>

#include "juice/common.hpp"

namespace juice {

/// Complex multivariate Gaussian belief over one effective channel.
/// Canonical form is (mean, covariance); natural parameters (precision,
/// precision * mean) are derived on demand and cached.
class GaussianBelief {
 public:
  GaussianBelief() = default;

  GaussianBelief(CVec mean, CMat cov) : mean_(std::move(mean)) {
    if (cov.rows() != cov.cols() || cov.rows() != mean_.size())
      throw DimensionError("GaussianBelief: mean/cov size mismatch");
    if (!is_hermitian(cov, 1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff())))
      throw DegenerateBeliefError("GaussianBelief: covariance not Hermitian");
    cov_ = hermitize(cov);
  }

  static GaussianBelief from_natural(const CMat& prec, const CVec& prec_mean) {
    CMat cov = inverse_hermitian_signed(prec);
    GaussianBelief g;
    g.mean_ = cov * prec_mean;
    g.cov_ = hermitize(cov);
    g.prec_ = hermitize(prec);
    g.prec_mean_ = prec_mean;
    g.nat_cached_ = true;
    return g;
  }

  int dim() const { return static_cast<int>(mean_.size()); }
  const CVec& mean() const { return mean_; }
  const CMat& cov() const { return cov_; }

  const CMat& precision() const {
    ensure_natural();
    return prec_;
  }
  const CVec& precision_mean() const {
    ensure_natural();
    return prec_mean_;
  }

  bool proper(double tol = 0.0) const { return min_eigenvalue(cov_) > tol; }

 private:
  // Inversion that tolerates indefinite (improper) Hermitian input.
  static CMat inverse_hermitian_signed(const CMat& a) {
    Eigen::LDLT<CMat> ldlt(hermitize(a));
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().array().abs() < 1e-300).any())
      throw DegenerateBeliefError("GaussianBelief: singular matrix");
    return ldlt.solve(CMat::Identity(a.rows(), a.cols()));
  }

  void ensure_natural() const {
    if (nat_cached_) return;
    prec_ = hermitize(inverse_hermitian_signed(cov_));
    prec_mean_ = prec_ * mean_;
    nat_cached_ = true;
  }

  CVec mean_;
  CMat cov_;
  mutable CMat prec_;
  mutable CVec prec_mean_;
  mutable bool nat_cached_ = false;
};

/// Belief together with the log of the scalar factor produced by a product
/// or quotient. The scale is unavailable when the quotient's argument matrix
/// is indefinite.
struct ScaledBelief {
  GaussianBelief belief;
  std::optional<double> log_scale;
  bool proper = true;
};

/// log CN(x; mu, Sigma) for Hermitian positive definite Sigma.
inline double log_density(const CVec& x, const CVec& mu, const CMat& sigma) {
  const int m = static_cast<int>(x.size());
  Eigen::LLT<CMat> llt(hermitize(sigma));
  if (llt.info() != Eigen::Success)
    throw DegenerateBeliefError("log_density: covariance not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < m; ++i) logdet += std::log(std::real(llt.matrixL()(i, i)));
  logdet *= 2.0;
  CVec r = x - mu;
  CVec w = llt.matrixL().solve(r);
  return -m * std::log(kPi) - logdet - w.squaredNorm();
}

/// log CN(0; mu, Sigma) of a proper belief.
inline double log_density_at_zero(const GaussianBelief& g) {
  return log_density(CVec::Zero(g.dim()), g.mean(), g.cov());
}

inline ScaledBelief product(const GaussianBelief& a, const GaussianBelief& b) {
  if (a.dim() != b.dim()) throw DimensionError("product: dimension mismatch");
  CMat prec = a.precision() + b.precision();
  CVec h = a.precision_mean() + b.precision_mean();
  ScaledBelief out;
  out.belief = GaussianBelief::from_natural(prec, h);
  CMat sum = a.cov() + b.cov();
  if (min_eigenvalue(sum) > 0.0)
    out.log_scale = log_density(a.mean(), b.mean(), sum);
  out.proper = out.belief.proper();
  return out;
}

inline ScaledBelief quotient(const GaussianBelief& a, const GaussianBelief& b) {
  if (a.dim() != b.dim()) throw DimensionError("quotient: dimension mismatch");
  CMat prec = a.precision() - b.precision();
  CVec h = a.precision_mean() - b.precision_mean();
  ScaledBelief out;
  out.belief = GaussianBelief::from_natural(prec, h);
  out.proper = out.belief.proper();
  // Scale such that CN(x; mu_a, S_a) / CN(x; mu_b, S_b) = K_q CN(x; mu_q, S_q)
  // pointwise. Only defined when S_b - S_a is positive definite; left
  // unavailable otherwise (it is never consumed in that regime).
  if (a.proper() && b.proper() && min_eigenvalue(b.cov() - a.cov()) > 0.0) {
    double quad = std::real(out.belief.mean().dot(out.belief.precision_mean())) -
                  std::real(a.mean().dot(a.precision_mean())) +
                  std::real(b.mean().dot(b.precision_mean()));
    out.log_scale = a.dim() * std::log(kPi) +
                    log_det_hermitian(out.belief.cov()) +
                    log_det_hermitian(b.cov()) - log_det_hermitian(a.cov()) +
                    quad;
  }
  return out;
}

}  // namespace juice
