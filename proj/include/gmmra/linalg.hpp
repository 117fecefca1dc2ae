#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "gmmra/errors.hpp"

namespace gmmra {

inline bool is_symmetric(const Eigen::MatrixXd& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1e-300, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// Ascending eigenvalues of the symmetric part of a.
inline Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a) {
  if (!a.allFinite()) throw DataError("matrix has non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DataError("symmetric eigensolver failed");
  return es.eigenvalues();
}

}  // namespace gmmra
