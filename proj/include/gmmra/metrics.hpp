#pragma once

// Orbit-aware error metrics and spectral diagnostics of weighting matrices.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "gmmra/errors.hpp"
#include "gmmra/linalg.hpp"
#include "gmmra/mra_model.hpp"

namespace gmmra {

/// min_s ||R_s x_hat - x|| / ||x||
inline double relative_error(const Signal& truth, const Signal& estimate) {
  if (truth.size() != estimate.size()) throw ParameterError("signal lengths differ");
  const double nx = truth.values().norm();
  if (!(nx > 0.0)) throw ParameterError("relative error undefined for a zero signal");
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < truth.size(); ++s)
    best = std::min(best, (circular_shift(estimate.values(), s) - truth.values()).norm());
  return best / nx;
}

struct OrbitError {
  double signal_error = 0.0;
  double rho_error = 0.0;
  int shift = 0;  // estimate ~ a_shift o truth
};

/// Aligns (x_hat, rho_hat) with one shared group element.
///
/// The reported shift s is the one for which x_hat ~ R_s x and
/// rho_hat ~ R_{-s} rho; both errors are measured after undoing it.
inline OrbitError joint_orbit_error(const OrbitPoint& truth, const OrbitPoint& est) {
  const int L = truth.signal.size();
  if (est.signal.size() != L || truth.distribution.size() != L || est.distribution.size() != L)
    throw ParameterError("orbit point lengths differ");
  const double nx = truth.signal.values().norm();
  if (!(nx > 0.0)) throw ParameterError("relative error undefined for a zero signal");
  OrbitError out;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < L; ++s) {
    const double e = (circular_shift(est.signal.values(), -s) - truth.signal.values()).norm();
    if (e < best) {
      best = e;
      out.shift = s;
    }
  }
  out.signal_error = best / nx;
  out.rho_error = (circular_shift(est.distribution.probs(), out.shift) - truth.distribution.probs()).norm() /
                  truth.distribution.probs().norm();
  return out;
}

/// delta(A) = sqrt( sum_j log^2( sqrt(n) lambda_j / ||A||_F ) ), natural log.
/// Zero exactly for multiples of the identity; scale invariant.
inline double geodesic_distance(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw ParameterError("geodesic distance needs a square matrix");
  const Eigen::VectorXd lam = symmetric_eigenvalues(a);
  if (!(lam[0] > 0.0)) throw DomainError("geodesic distance needs a positive definite matrix");
  const double n = static_cast<double>(a.rows());
  // ||A||_F from the spectrum keeps the value exactly invariant under orthogonal conjugation up to rounding.
  const double fro = lam.norm();
  double acc = 0.0;
  for (int j = 0; j < lam.size(); ++j) {
    const double l = std::log(std::sqrt(n) * lam[j] / fro);
    acc += l * l;
  }
  return std::sqrt(acc);
}

struct DiagnosticReport {
  double geodesic_distance = std::numeric_limits<double>::quiet_NaN();
  double condition_number = std::numeric_limits<double>::infinity();
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  int q = 0;
  bool spd = false;
};

inline DiagnosticReport condition_report(const Eigen::MatrixXd& a) {
  if (!is_symmetric(a)) throw ParameterError("condition report needs a symmetric matrix");
  const Eigen::VectorXd lam = symmetric_eigenvalues(a);
  DiagnosticReport rep;
  rep.q = static_cast<int>(a.rows());
  rep.min_eigenvalue = lam[0];
  rep.max_eigenvalue = lam[lam.size() - 1];
  rep.spd = lam[0] > 0.0;
  if (rep.spd) {
    rep.condition_number = rep.max_eigenvalue / rep.min_eigenvalue;
    rep.geodesic_distance = geodesic_distance(a);
  }
  return rep;
}

}  // namespace gmmra
