#pragma once

// Deduplicated analytic moments as a function of (x, rho), with a
// vector-Jacobian product for gradients, and the sample moment function
//   g_N(theta) = analytic_moments(theta) - empirical_moments.

#include <Eigen/Dense>

#include <vector>

#include "gmmra/errors.hpp"
#include "gmmra/moment_engine.hpp"
#include "gmmra/moment_index.hpp"
#include "gmmra/mra_model.hpp"

namespace gmmra {

class MomentFunction {
 public:
  MomentFunction(int L, const NoiseModel& model, const MomentIndexMap& map)
      : L_(L), model_(model), map_(map), weight_(model.inlier_weight()) {
    model.validate(L);
    if (map.dim() != model.observation_dim(L)) throw ParameterError("index map dimension does not match model");
    if (map.order() == 3 && !model.is_plain())
      throw UnsupportedError("third moment is only available for plain Gaussian noise");
    const int r = map.dim();
    variances_ = model.base_variances(L).head(r);
    offset_ = Vector::Zero(map.size());
    const Matrix b = model.second_moment_offset(L);
    for (int e = map.m2_offset(); e < map.m3_offset(); ++e) offset_[e] = b(map[e].idx[0], map[e].idx[1]);
  }

  int signal_length() const noexcept { return L_; }
  const MomentIndexMap& index_map() const noexcept { return map_; }
  const NoiseModel& model() const noexcept { return model_; }

  /// Stacked deduplicated [M1; M2; (M3)].
  Vector evaluate(const Vector& x, const Vector& rho) const {
    check(x, rho);
    const int r = map_.dim();
    const int q = map_.size();
    const auto& ent = map_.entries();
    Vector v = Vector::Zero(q);
    Vector a(L_);
    for (int s = 0; s < L_; ++s) {
      const double w = rho[s];
      if (w == 0.0) continue;
      for (int j = 0; j < L_; ++j) a[j] = x[wrap_index(j - s, L_)];
      int e = 0;
      for (; e < r; ++e) v[e] += w * a[e];
      for (; e < map_.m3_offset(); ++e) v[e] += w * a[ent[e].idx[0]] * a[ent[e].idx[1]];
      for (; e < q; ++e) v[e] += w * a[ent[e].idx[0]] * a[ent[e].idx[1]] * a[ent[e].idx[2]];
    }
    v.head(map_.m3_offset()) *= weight_;
    v += offset_;
    if (map_.order() == 3) {
      // m_i Sigma_jk + m_j Sigma_ik + m_k Sigma_ij with diagonal Sigma.
      const auto m = v.head(r);
      for (int e = map_.m3_offset(); e < q; ++e) {
        const auto [i, j, k] = ent[e].idx;
        double extra = 0.0;
        if (j == k) extra += m[i] * variances_[j];
        if (i == k) extra += m[j] * variances_[i];
        if (i == j) extra += m[k] * variances_[i];
        v[e] += extra;
      }
    }
    return v;
  }

  /// Accumulates u^T d(evaluate)/dx into grad_x and u^T d(evaluate)/drho into grad_rho.
  void vjp(const Vector& x, const Vector& rho, const Vector& u, Vector& grad_x, Vector& grad_rho) const {
    check(x, rho);
    const int r = map_.dim();
    const int q = map_.size();
    if (u.size() != q) throw ParameterError("cotangent length does not match index map");
    const auto& ent = map_.entries();

    // Cotangent on the raw (unscaled) shift average of a = R_s x for each block.
    Vector u1 = u.head(r);
    if (map_.order() == 3) {
      for (int e = map_.m3_offset(); e < q; ++e) {
        const auto [i, j, k] = ent[e].idx;
        if (j == k) u1[i] += u[e] * variances_[j];
        if (i == k) u1[j] += u[e] * variances_[i];
        if (i == j) u1[k] += u[e] * variances_[i];
      }
    }
    u1 *= weight_;

    grad_x.setZero(L_);
    grad_rho.setZero(L_);
    Vector a(L_), ga(L_);
    for (int s = 0; s < L_; ++s) {
      for (int j = 0; j < L_; ++j) a[j] = x[wrap_index(j - s, L_)];
      ga.setZero();
      double gr = 0.0;
      for (int i = 0; i < r; ++i) {
        gr += u1[i] * a[i];
        ga[i] += u1[i];
      }
      for (int e = r; e < map_.m3_offset(); ++e) {
        const int i = ent[e].idx[0], j = ent[e].idx[1];
        const double ue = weight_ * u[e];
        gr += ue * a[i] * a[j];
        ga[i] += ue * a[j];
        ga[j] += ue * a[i];
      }
      for (int e = map_.m3_offset(); e < q; ++e) {
        const auto [i, j, k] = ent[e].idx;
        const double ue = u[e];
        gr += ue * a[i] * a[j] * a[k];
        ga[i] += ue * a[j] * a[k];
        ga[j] += ue * a[i] * a[k];
        ga[k] += ue * a[i] * a[j];
      }
      grad_rho[s] += gr;
      const double w = rho[s];
      for (int i = 0; i < L_; ++i) grad_x[wrap_index(i - s, L_)] += w * ga[i];
    }
  }

 private:
  void check(const Vector& x, const Vector& rho) const {
    if (x.size() != L_ || rho.size() != L_) throw ParameterError("parameter length does not match model");
  }

  int L_;
  NoiseModel model_;
  MomentIndexMap map_;
  double weight_;
  Vector variances_;
  Vector offset_;
};

/// Deduplicated analytic moments at (x, rho) minus the empirical ones.
inline MomentVector g_N(const Signal& x, const SimplexDistribution& rho, const MomentVector& emp,
                        const NoiseModel& model, const MomentIndexMap& map) {
  if (!(emp.index_map == map)) throw ParameterError("empirical moments were built with a different index map");
  if (emp.size() != map.size()) throw ParameterError("empirical moment vector has the wrong length");
  const MomentFunction f(x.size(), model, map);
  return {f.evaluate(x.values(), rho.probs()) - emp.values, map};
}

/// Analytic moments packed into the deduplicated layout.
inline MomentVector analytic_moments(const Signal& x, const SimplexDistribution& rho, const NoiseModel& model,
                                     const MomentIndexMap& map) {
  const MomentFunction f(x.size(), model, map);
  return {f.evaluate(x.values(), rho.probs()), map};
}

}  // namespace gmmra
