#pragma once

// Brute-force oracles and random instances shared by the test suites. The
// oracles sum over shifts explicitly and never call the circulant or
// deduplicated code paths they check.

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "gmmra/gmmra.hpp"

namespace gmmra::oracle {

inline Vector shift_by_index_formula(const Vector& v, int s) {
  const int L = static_cast<int>(v.size());
  Vector out(L);
  for (int j = 0; j < L; ++j) out[j] = v[((j - s) % L + L) % L];
  return out;
}

inline Vector brute_m1(const Signal& x, const SimplexDistribution& rho, const NoiseModel& m) {
  const int L = x.size();
  const int r = m.observation_dim(L);
  Vector acc = Vector::Zero(L);
  for (int s = 0; s < L; ++s) acc += rho[s] * shift_by_index_formula(x.values(), s);
  return m.inlier_weight() * acc.head(r);
}

inline Matrix brute_m2(const Signal& x, const SimplexDistribution& rho, const NoiseModel& m) {
  const int L = x.size();
  const int r = m.observation_dim(L);
  Matrix acc = Matrix::Zero(r, r);
  for (int s = 0; s < L; ++s) {
    const Vector a = shift_by_index_formula(x.values(), s).head(r);
    acc += rho[s] * a * a.transpose();
  }
  acc *= m.inlier_weight();
  for (int i = 0; i < r; ++i) {
    const double var = m.kind == NoiseKind::Homoscedastic ? m.sigma2 : m.sigma2 * (i + 1);
    acc(i, i) += m.inlier_weight() * var;
    if (m.outlier) acc(i, i) += m.outlier->p_out * m.outlier->sigma2_out;
  }
  return acc;
}

inline std::vector<double> dense_power3(const Vector& y) {
  const int r = static_cast<int>(y.size());
  std::vector<double> t(static_cast<std::size_t>(r) * r * r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < r; ++k) t[(i * r + j) * r + k] = y[i] * y[j] * y[k];
  return t;
}

struct Instance {
  Signal x;
  SimplexDistribution rho;
  NoiseModel model;
};

// Plain two-pass covariance of explicitly built feature rows.
inline Matrix two_pass_covariance(const RowMatrix& data, const MomentIndexMap& map) {
  const int n = static_cast<int>(data.rows());
  Matrix f(n, map.size());
  for (int i = 0; i < n; ++i) f.row(i) = feature_vector(Vector(data.row(i).transpose()), map).values.transpose();
  const Vector mean = f.colwise().mean();
  Matrix c = Matrix::Zero(map.size(), map.size());
  for (int i = 0; i < n; ++i) {
    const Vector d = f.row(i).transpose() - mean;
    c += d * d.transpose();
  }
  return c / (n - 1);
}

// Minimum of the sum of distances by nested grid refinement (the objective is convex).
inline double grid_median_objective(const RowMatrix& pts) {
  const int q = static_cast<int>(pts.cols());
  Vector lo = pts.colwise().minCoeff().transpose();
  Vector hi = pts.colwise().maxCoeff().transpose();
  Vector best = 0.5 * (lo + hi);
  double fbest = sum_of_distances(pts, best);
  constexpr int kSide = 21;
  for (int level = 0; level < 40; ++level) {
    const Vector step = (hi - lo) / (kSide - 1);
    std::vector<int> idx(q, 0);
    Vector center = best;
    while (true) {
      Vector z(q);
      for (int j = 0; j < q; ++j) z[j] = lo[j] + idx[j] * step[j];
      const double f = sum_of_distances(pts, z);
      if (f < fbest) {
        fbest = f;
        center = z;
      }
      int j = 0;
      while (j < q && ++idx[j] == kSide) idx[j++] = 0;
      if (j == q) break;
    }
    best = center;
    lo = best - 2 * step;
    hi = best + 2 * step;
  }
  return fbest;
}

// Relative error of an analytic gradient against central differences.
inline double gradient_check(const ObjectiveFn& fn, const Vector& theta) {
  Vector g;
  fn(theta, &g);
  Vector fd(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    fd[i] = (fn(tp, nullptr) - fn(tm, nullptr)) / (2 * h);
  }
  return (g - fd).norm() / std::max(1e-12, fd.norm());
}

class Random {
 public:
  explicit Random(unsigned seed) : gen_(seed) {}

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen_); }

  Signal signal(int L) {
    Vector v(L);
    for (int i = 0; i < L; ++i) v[i] = normal();
    return Signal(v / v.norm());
  }
  SimplexDistribution simplex(int L) {
    Vector e(L);
    for (int i = 0; i < L; ++i) e[i] = std::exponential_distribution<double>(1.0)(gen_);
    return SimplexDistribution::normalized(e);
  }
  Matrix spd(int n) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = normal();
    return a * a.transpose() + 0.5 * Matrix::Identity(n, n);
  }
  // variant: 0 homoscedastic, 1 heteroscedastic, 2 outlier, 3 projected
  NoiseModel model(int variant, int L) {
    const double s2 = uniform(0.01, 0.5);
    NoiseModel base = integer(0, 1) ? NoiseModel::homoscedastic(s2) : NoiseModel::heteroscedastic(s2);
    if (variant == 0) return NoiseModel::homoscedastic(s2);
    if (variant == 1) return NoiseModel::heteroscedastic(s2);
    if (variant == 2) return base.with_outliers(uniform(0.0, 0.5), uniform(0.1, 3.0));
    return base.projected(integer(1, L));
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gmmra::oracle
