#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace juice {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration; message names the violated constraint.
struct ConfigError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

/// A Gaussian belief operation hit a singular or non-PSD matrix.
struct DegenerateBeliefError : Error {
  using Error::Error;
};

/// Linear-algebra failure that aborts a trial.
struct NumericalError : Error {
  using Error::Error;
};

/// Metric undefined for the given inputs (e.g. empty true support).
struct MetricError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hermitian helpers

inline CMat hermitize(const CMat& a) { return 0.5 * (a + a.adjoint()); }

inline bool is_hermitian(const CMat& a, double tol = 1e-10) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline double min_eigenvalue(const CMat& a) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const CMat& a, double tol = 0.0) {
  return min_eigenvalue(a) >= -tol;
}

/// Hermitian square root with negative eigenvalues clipped to zero.
inline CMat psd_sqrt(const CMat& a) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(a));
  RVec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Solve A x = b for Hermitian positive definite A. Falls back to a jittered
/// retry before giving up.
inline CMat solve_hermitian(const CMat& a, const CMat& b,
                            double jitter = 1e-12) {
  Eigen::LLT<CMat> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  CMat aj = a + jitter * a.rows() * CMat::Identity(a.rows(), a.cols());
  Eigen::LLT<CMat> llt2(aj);
  if (llt2.info() != Eigen::Success)
    throw NumericalError("solve_hermitian: matrix not positive definite");
  return llt2.solve(b);
}

inline CMat inverse_hermitian(const CMat& a, double jitter = 1e-12) {
  return solve_hermitian(a, CMat::Identity(a.rows(), a.cols()), jitter);
}

/// log|A| for Hermitian positive definite A, via Cholesky.
inline double log_det_hermitian(const CMat& a) {
  Eigen::LLT<CMat> llt(a);
  if (llt.info() != Eigen::Success)
    throw DegenerateBeliefError("log_det_hermitian: not positive definite");
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    s += std::log(std::real(llt.matrixL()(i, i)));
  return 2.0 * s;
}

inline double logsumexp2(double a, double b) {
  double m = std::max(a, b);
  if (std::isinf(m) && m < 0) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// ---------------------------------------------------------------------------
// Seed derivation. A fixed 64-bit mix so that scenario draws never depend on
// which algorithms are enabled or how trials are scheduled.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (a + 0x9E3779B97F4A7C15ULL));
  s = splitmix64(s ^ (b + 0xBF58476D1CE4E5B9ULL));
  return s;
}

}  // namespace juice
