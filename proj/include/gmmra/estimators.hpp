#pragma once

// Moment-matching estimators for MRA.
//
//   ls   : min g^T g                      (classical method of moments)
//   gmm  : min g^T W g, W = (S + lambda I)^{-1}, S the feature covariance
//   gm   : weighted LAD against the geometric median of the features,
//          with alternating updates of the weight vector
//
// All of them run the same multi-start BFGS over theta = [x; logits].

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gmmra/errors.hpp"
#include "gmmra/linalg.hpp"
#include "gmmra/moment_engine.hpp"
#include "gmmra/moment_function.hpp"
#include "gmmra/mra_model.hpp"
#include "gmmra/optimizer.hpp"
#include "gmmra/param.hpp"
#include "gmmra/rng.hpp"

namespace gmmra {

struct EstimatorConfig {
  int moments_order = 2;
  int starts = 5;
  OptimizerConfig optimizer;
  double ridge_rel = 0.0;
  // Alternating LAD: total theta solves n (n - 1 weight-vector updates).
  int lad_steps = 2;
  // |h| is evaluated as sqrt(h^2 + eps^2) - eps so BFGS sees a smooth surface.
  double lad_smoothing = 1e-9;
  int sphere_iters = 100;
  double sphere_step = 0.01;
  double weiszfeld_tol = 1e-10;
  int weiszfeld_max_iter = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
};

enum class WeightSource { Identity, InverseCovariance };

struct WeightingMatrix {
  Matrix matrix;
  double ridge_used = 0.0;
  WeightSource source = WeightSource::Identity;
  double condition_number = 1.0;  // of S + ridge I

  static WeightingMatrix identity(int q) { return {Matrix::Identity(q, q), 0.0, WeightSource::Identity, 1.0}; }
};

struct EstimationResult {
  Signal signal;
  SimplexDistribution distribution;
  double objective = 0.0;
  int starts_tried = 0;
  bool converged = false;
  int iterations = 0;
  std::chrono::nanoseconds wall_time{0};
  std::vector<double> start_objectives;  // converged objective of every start, in start order
  int best_start = 0;
  ParamVector theta;

  OrbitPoint orbit_point() const { return {signal, distribution}; }
};

/// W = (S + lambda I)^{-1}, lambda = ridge_rel * trace(S) / q, via a symmetric eigendecomposition.
inline WeightingMatrix build_weighting(const CovarianceEstimate& S, double ridge_rel) {
  const Matrix& s = S.matrix;
  if (!s.allFinite()) throw DataError("covariance has non-finite entries");
  if (s.rows() != s.cols()) throw ParameterError("covariance must be square");
  if (!(ridge_rel >= 0.0)) throw ParameterError("ridge must be non-negative");
  const auto q = s.rows();
  const double lambda = ridge_rel * s.trace() / static_cast<double>(q);
  Matrix a = 0.5 * (s + s.transpose());
  a.diagonal().array() += lambda;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw DataError("eigendecomposition of covariance failed");
  const Vector& lam = es.eigenvalues();
  const double lmax = lam[q - 1];
  const double lmin = lam[0];
  const double cond = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > static_cast<double>(q) * std::numeric_limits<double>::epsilon() * lmax))
    throw ConditioningError("covariance is singular to working precision; use a positive ridge", cond);
  const Matrix& v = es.eigenvectors();
  Matrix w = v * lam.cwiseInverse().asDiagonal() * v.transpose();
  w = (0.5 * (w + w.transpose())).eval();
  return {std::move(w), lambda, WeightSource::InverseCovariance, cond};
}

// ---------------------------------------------------------------------------
// Objectives over the packed parameter [x; logits].

namespace detail {

inline double pull_back(const MomentFunction& f, const Vector& theta, const Vector& u_or_empty, Vector* grad,
                        double value) {
  if (grad) {
    const int L = f.signal_length();
    const Vector x = theta.head(L);
    const Vector rho = softmax(theta.tail(L));
    Vector gx, grho;
    f.vjp(x, rho, u_or_empty, gx, grho);
    grad->resize(2 * L);
    grad->head(L) = gx;
    grad->tail(L) = softmax_backward(rho, grho);
  }
  return value;
}

}  // namespace detail

/// theta -> g(theta)^T W g(theta), g = analytic - target. Identity W when weight is empty.
class QuadraticMomentObjective {
 public:
  QuadraticMomentObjective(MomentFunction f, Vector target, std::optional<Matrix> weight = std::nullopt)
      : f_(std::move(f)), target_(std::move(target)), weight_(std::move(weight)) {
    if (target_.size() != f_.index_map().size()) throw ParameterError("target length does not match index map");
    if (weight_ && (weight_->rows() != target_.size() || weight_->cols() != target_.size()))
      throw ParameterError("weighting matrix has the wrong shape");
  }

  double operator()(const Vector& theta, Vector* grad) const {
    const Vector g = residual(theta);
    if (!weight_) return detail::pull_back(f_, theta, 2.0 * g, grad, g.squaredNorm());
    const Vector wg = *weight_ * g;
    return detail::pull_back(f_, theta, 2.0 * wg, grad, g.dot(wg));
  }

  Vector residual(const Vector& theta) const {
    const int L = f_.signal_length();
    return f_.evaluate(theta.head(L), softmax(theta.tail(L))) - target_;
  }

  const MomentFunction& moment_function() const noexcept { return f_; }

 private:
  MomentFunction f_;
  Vector target_;
  std::optional<Matrix> weight_;
};

/// theta -> sum_j |w_j| * smooth_abs(h_j(theta)), h = analytic - target.
class LadMomentObjective {
 public:
  LadMomentObjective(MomentFunction f, Vector target, Vector weights, double smoothing)
      : f_(std::move(f)), target_(std::move(target)), w_(weights.cwiseAbs()), eps_(smoothing) {
    if (target_.size() != f_.index_map().size() || w_.size() != target_.size())
      throw ParameterError("LAD target/weights length does not match index map");
    if (!(eps_ >= 0.0)) throw ParameterError("LAD smoothing must be non-negative");
  }

  double operator()(const Vector& theta, Vector* grad) const {
    const int L = f_.signal_length();
    const Vector h = f_.evaluate(theta.head(L), softmax(theta.tail(L))) - target_;
    double value = 0.0;
    Vector u(h.size());
    for (int j = 0; j < h.size(); ++j) {
      const double r = std::sqrt(h[j] * h[j] + eps_ * eps_);
      value += w_[j] * (r - eps_);
      u[j] = r > 0.0 ? w_[j] * h[j] / r : 0.0;
    }
    return detail::pull_back(f_, theta, u, grad, value);
  }

  Vector residual(const Vector& theta) const {
    const int L = f_.signal_length();
    return f_.evaluate(theta.head(L), softmax(theta.tail(L))) - target_;
  }

 private:
  MomentFunction f_;
  Vector target_;
  Vector w_;
  double eps_;
};

// ---------------------------------------------------------------------------
// Multi-start driver.

/// Initial points: start 0 and starts >= 2 draw x ~ N(0, I/L) and logits ~ N(0, 0.1);
/// start 1 uses the empirical first moment as x with the same near-uniform logits.
inline std::vector<Vector> initial_points(int L, const MomentVector& emp, const NoiseModel& model, int starts,
                                          std::uint64_t seed) {
  std::vector<Vector> out;
  const double logit_sd = std::sqrt(0.1);
  const double x_sd = 1.0 / std::sqrt(static_cast<double>(L));
  for (int k = 0; k < starts; ++k) {
    CounterRng rng{seed, 0x5354415254ULL, static_cast<std::uint64_t>(k)};
    Vector theta(2 * L);
    for (int i = 0; i < L; ++i) theta[i] = x_sd * rng.normal();
    for (int i = 0; i < L; ++i) theta[L + i] = logit_sd * rng.normal();
    if (k == 1) {
      const int r = emp.index_map.dim();
      const double w = model.inlier_weight();
      theta.head(L).setZero();
      theta.head(r) = emp.values.head(r) / (w > 0.0 ? w : 1.0);
    }
    out.push_back(std::move(theta));
  }
  return out;
}

struct MultiStartOutcome {
  OptimizeResult best;
  int best_start = 0;
  std::vector<double> objectives;
  int total_iterations = 0;
};

inline MultiStartOutcome run_starts(const ObjectiveFn& fn, const std::vector<Vector>& starts,
                                    const OptimizerConfig& cfg) {
  MultiStartOutcome out;
  bool have = false;
  std::vector<double> best_seen;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    try {
      OptimizeResult r = local_minimize(fn, starts[k], cfg);
      out.objectives.push_back(r.objective);
      out.total_iterations += r.iterations;
      if (!have || r.objective < out.best.objective) {
        out.best = std::move(r);
        out.best_start = static_cast<int>(k);
        have = true;
      }
    } catch (const NumericError& e) {
      out.objectives.push_back(std::numeric_limits<double>::quiet_NaN());
      if (best_seen.empty()) best_seen = e.last_safe_iterate;
    }
  }
  if (!have) throw ConvergenceError("optimizer failed from every start", best_seen,
                                    std::numeric_limits<double>::quiet_NaN());
  return out;
}

inline EstimationResult make_result(const MultiStartOutcome& ms, int starts,
                                    std::chrono::steady_clock::time_point t0) {
  const ParamVector theta(ms.best.x);
  return EstimationResult{theta.signal(),
                          theta.distribution(),
                          ms.best.objective,
                          starts,
                          ms.best.converged(),
                          ms.total_iterations,
                          std::chrono::steady_clock::now() - t0,
                          ms.objectives,
                          ms.best_start,
                          theta};
}

/// Minimizes g^T W g over theta from the configured starts (identity W when weight is empty).
inline EstimationResult estimate_weighted(const MomentVector& emp, const NoiseModel& model, int L,
                                          const EstimatorConfig& cfg, std::optional<Matrix> weight) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!emp.values.allFinite()) throw DataError("empirical moments are not finite");
  // Minimize with W / (tr W / q) so the iterates do not depend on the scale of W.
  double scale = 1.0;
  if (weight) {
    scale = weight->trace() / static_cast<double>(weight->rows());
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("weighting matrix must have positive trace");
    *weight /= scale;
  }
  const QuadraticMomentObjective obj(MomentFunction(L, model, emp.index_map), emp.values, std::move(weight));
  const auto starts = initial_points(L, emp, model, cfg.starts, cfg.seed);
  const auto ms = run_starts(std::cref(obj), starts, cfg.optimizer);
  EstimationResult r = make_result(ms, cfg.starts, t0);
  r.objective *= scale;
  for (double& o : r.start_objectives) o *= scale;
  return r;
}

/// Classical least-squares method of moments.
inline EstimationResult ls_estimate(const MomentVector& emp, const NoiseModel& model, int L,
                                    const EstimatorConfig& cfg) {
  return estimate_weighted(emp, model, L, cfg, std::nullopt);
}

struct GmmOutcome {
  EstimationResult result;
  WeightingMatrix weighting;
  CovarianceEstimate covariance;
};

/// Optimally weighted GMM from precomputed moments and covariance.
inline GmmOutcome gmm_estimate(const MomentSummary& summary, const NoiseModel& model, int L,
                               const EstimatorConfig& cfg) {
  if (!summary.covariance) throw ParameterError("GMM needs the feature covariance");
  WeightingMatrix w = build_weighting(*summary.covariance, cfg.ridge_rel);
  EstimationResult r = estimate_weighted(summary.moments, model, L, cfg, w.matrix);
  return {std::move(r), std::move(w), *summary.covariance};
}

/// Algorithm: one pass for moments and covariance, W = S^{-1}, then minimize g^T W g.
inline GmmOutcome gmm_estimate(const ObservationSet& obs, const NoiseModel& model, int L,
                               const EstimatorConfig& cfg) {
  if (obs.count() < 2) throw ParameterError("GMM needs at least two observations");
  const MomentIndexMap map(model.observation_dim(L), cfg.moments_order);
  const auto t0 = std::chrono::steady_clock::now();
  const MomentSummary summary = accumulate_moments(obs.data, map, {.with_covariance = true, .threads = cfg.threads});
  GmmOutcome out = gmm_estimate(summary, model, L, cfg);
  out.result.wall_time = std::chrono::steady_clock::now() - t0;
  return out;
}

inline EstimationResult ls_estimate(const ObservationSet& obs, const NoiseModel& model, int L,
                                    const EstimatorConfig& cfg) {
  const MomentIndexMap map(model.observation_dim(L), cfg.moments_order);
  const auto t0 = std::chrono::steady_clock::now();
  EstimationResult r = ls_estimate(empirical_moments(obs, map, cfg.threads), model, L, cfg);
  r.wall_time = std::chrono::steady_clock::now() - t0;
  return r;
}

// ---------------------------------------------------------------------------
// Geometric median.

struct WeiszfeldResult {
  Vector point;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // sum of distances at each accepted iterate
};

inline double sum_of_distances(const RowMatrix& pts, const Vector& z) {
  return (pts.rowwise() - z.transpose()).rowwise().norm().sum();
}

/// argmin_z sum_i ||z - y_i|| by Weiszfeld iterations from the coordinatewise mean.
///
/// If an iterate lands on a data point y_k (within 1e-12), y_k is returned when
/// ||sum_{i != k} (y_i - y_k) / ||y_i - y_k|| || <= multiplicity(y_k);
/// otherwise the iterate is nudged off the point and the iteration continues.
inline WeiszfeldResult weiszfeld_median(const RowMatrix& pts, double tol, int max_iter, std::uint64_t seed = 0) {
  if (pts.rows() < 1) throw ParameterError("geometric median needs at least one point");
  if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
  if (!pts.allFinite()) throw DataError("points contain non-finite values");
  constexpr double kCoincide = 1e-12;
  const auto n = pts.rows();
  const auto q = pts.cols();

  WeiszfeldResult res;
  Vector z = pts.colwise().mean().transpose();
  const double spread = std::max(1.0, (pts.rowwise() - z.transpose()).rowwise().norm().maxCoeff());
  res.objective = sum_of_distances(pts, z);
  res.objective_trace.push_back(res.objective);
  CounterRng rng{seed, 0x57454953ULL};

  Eigen::VectorXd d(n);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    d = (pts.rowwise() - z.transpose()).rowwise().norm();
    Eigen::Index k = 0;
    if (d.minCoeff(&k) < kCoincide) {
      Vector pull = Vector::Zero(q);
      int multiplicity = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d[i] < kCoincide) {
          ++multiplicity;
        } else {
          pull += (pts.row(i).transpose() - z) / d[i];
        }
      }
      if (pull.norm() <= multiplicity) {
        res.point = pts.row(k).transpose();
        res.objective = sum_of_distances(pts, res.point);
        res.objective_trace.push_back(res.objective);
        res.converged = true;
        return res;
      }
      for (Eigen::Index j = 0; j < q; ++j) z[j] += 1e-9 * spread * rng.normal();
      continue;
    }
    const Eigen::VectorXd inv = d.cwiseInverse();
    const Vector next = (pts.transpose() * inv) / inv.sum();
    const double step = (next - z).norm();
    const double f_next = sum_of_distances(pts, next);
    z = next;
    res.objective = f_next;
    res.objective_trace.push_back(f_next);
    if (step < tol) {
      res.converged = true;
      break;
    }
  }
  res.point = z;
  return res;
}

inline WeiszfeldResult weiszfeld_median(const std::vector<MomentVector>& points, double tol, int max_iter) {
  if (points.empty()) throw ParameterError("geometric median needs at least one point");
  RowMatrix pts(points.size(), points.front().size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != pts.cols()) throw ParameterError("points have different lengths");
    pts.row(static_cast<Eigen::Index>(i)) = points[i].values.transpose();
  }
  return weiszfeld_median(pts, tol, max_iter);
}

/// All feature vectors, one row per observation.
inline RowMatrix feature_matrix(const RowMatrix& data, const MomentIndexMap& map) {
  if (data.cols() != map.dim()) throw ParameterError("observation dimension does not match index map");
  RowMatrix f(data.rows(), map.size());
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    fill_features(std::span<const double>(data.row(i).data(), static_cast<std::size_t>(data.cols())), map,
                  f.row(i).data());
  return f;
}

/// min over the unit sphere of sum_j |w_j| |h_j|: projected gradient with
/// step halving from the given point. Step sizes are angles (radians).
inline Vector sphere_weight_step(const Vector& abs_residual, Vector w, int iters, double step) {
  w.normalize();
  auto value = [&](const Vector& v) { return v.cwiseAbs().dot(abs_residual); };
  double f = value(w);
  for (int it = 0; it < iters; ++it) {
    const Vector eg = w.cwiseSign().cwiseProduct(abs_residual);
    const Vector rg = eg - eg.dot(w) * w;
    const double gn = rg.norm();
    if (!(gn > 0.0)) break;
    const Vector dir = -rg / gn;
    double a = step;
    bool moved = false;
    for (int h = 0; h < 40; ++h) {
      const Vector cand = (std::cos(a) * w + std::sin(a) * dir).normalized();
      const double fc = value(cand);
      if (fc < f) {
        w = cand;
        f = fc;
        moved = true;
        break;
      }
      a *= 0.5;
    }
    if (!moved) break;
  }
  return w;
}

struct GmOutcome {
  EstimationResult result;
  Vector median;          // geometric median of the features
  Vector lad_weights;     // final weight vector
  WeiszfeldResult weiszfeld;
};

/// Geometric-median estimator with alternating weighted LAD.
inline GmOutcome gm_estimate(const ObservationSet& obs, const NoiseModel& model, int L,
                             const EstimatorConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.lad_steps < 1) throw ParameterError("LAD step count must be at least 1");
  const MomentIndexMap map(model.observation_dim(L), cfg.moments_order);
  const RowMatrix feats = feature_matrix(obs.data, map);
  WeiszfeldResult wz = weiszfeld_median(feats, cfg.weiszfeld_tol, cfg.weiszfeld_max_iter, cfg.seed);
  const MomentVector gm{wz.point, map};
  const MomentFunction f(L, model, map);
  const int q = map.size();

  Vector w = Vector::Ones(q);
  const LadMomentObjective first(f, gm.values, w, cfg.lad_smoothing);
  MultiStartOutcome ms = run_starts(std::cref(first), initial_points(L, gm, model, cfg.starts, cfg.seed),
                                    cfg.optimizer);
  for (int step = 2; step <= cfg.lad_steps; ++step) {
    const Vector h = first.residual(ms.best.x).cwiseAbs();
    w = sphere_weight_step(h, Vector::Constant(q, 1.0 / std::sqrt(static_cast<double>(q))), cfg.sphere_iters,
                           cfg.sphere_step);
    const LadMomentObjective next(f, gm.values, w, cfg.lad_smoothing);
    MultiStartOutcome warm = run_starts(std::cref(next), {ms.best.x}, cfg.optimizer);
    warm.total_iterations += ms.total_iterations;
    ms = std::move(warm);
  }
  EstimationResult r = make_result(ms, cfg.starts, t0);
  Vector median = wz.point;
  return {std::move(r), std::move(median), std::move(w), std::move(wz)};
}

}  // namespace gmmra
