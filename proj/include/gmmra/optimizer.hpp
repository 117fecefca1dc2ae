#pragma once

// BFGS with Armijo backtracking. The objective never increases between
// accepted iterates.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gmmra/errors.hpp"

namespace gmmra {

struct OptimizerConfig {
  double g_tol = 1e-8;
  double x_tol = 1e-10;
  int max_iter = 2000;
};

enum class StopReason { GradientTolerance, StepTolerance, NoProgress, MaxIterations };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::StepTolerance: return "step_tolerance";
    case StopReason::NoProgress: return "no_progress";
    case StopReason::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

struct OptimizeResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  StopReason reason = StopReason::MaxIterations;

  bool converged() const noexcept { return reason != StopReason::MaxIterations; }
};

// Returns f(x); writes the gradient into *grad when grad is non-null.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

inline OptimizeResult local_minimize(const ObjectiveFn& fn, const Eigen::VectorXd& start,
                                     const OptimizerConfig& cfg = {}) {
  using Eigen::VectorXd;
  const auto n = start.size();
  auto as_std = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  VectorXd x = start;
  VectorXd g(n);
  double f = fn(x, &g);
  if (!std::isfinite(f) || !g.allFinite()) throw NumericError("objective not finite at start", as_std(start));

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh_H = true;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 60;

  OptimizeResult res;
  VectorXd x_new(n), g_new(n);
  for (int it = 0; it < cfg.max_iter; ++it) {
    if (g.norm() < cfg.g_tol) {
      res.reason = StopReason::GradientTolerance;
      res.iterations = it;
      res.x = x;
      res.objective = f;
      return res;
    }
    VectorXd d = -H * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      fresh_H = true;
      d = -g;
      slope = -g.squaredNorm();
    }
    // Without curvature information, cap the first trial step at unit length.
    double alpha = fresh_H ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    bool accepted = false;
    double f_new = f;
    for (int h = 0; h < kMaxHalvings; ++h) {
      x_new = x + alpha * d;
      f_new = fn(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * alpha * slope) {
        if (!g_new.allFinite()) throw NumericError("gradient not finite", as_std(x));
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!fresh_H) {
        H.setIdentity();
        fresh_H = true;
        continue;
      }
      res.reason = StopReason::NoProgress;
      res.iterations = it;
      res.x = x;
      res.objective = f;
      return res;
    }
    const VectorXd s = x_new - x;
    const VectorXd y = g_new - g;
    x = x_new;
    f = f_new;
    g = g_new;
    if (s.norm() < cfg.x_tol) {
      res.reason = StopReason::StepTolerance;
      res.iterations = it + 1;
      res.x = x;
      res.objective = f;
      return res;
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_H) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const VectorXd Hy = H * y;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
      fresh_H = false;
    }
  }
  res.reason = StopReason::MaxIterations;
  res.iterations = cfg.max_iter;
  res.x = x;
  res.objective = f;
  return res;
}

}  // namespace gmmra
