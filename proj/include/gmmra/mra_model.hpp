#pragma once

// Multi-reference alignment model: y_i = P R_{s_i} x + eps_i.
//
// Signals live in R^L, shifts s_i are drawn from a distribution rho over
// Z_L, and eps_i is Gaussian with a diagonal covariance. Optional layers:
// an outlier mixture (row replaced by pure N(0, sigma2_out I) noise with
// probability p_out) and a projection keeping the first K coordinates.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmmra/errors.hpp"
#include "gmmra/rng.hpp"

namespace gmmra {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline int wrap_index(long long i, int L) {
  const long long m = i % L;
  return static_cast<int>(m < 0 ? m + L : m);
}

// (R_s v)[j] = v[(j - s) mod L]
inline Vector circular_shift(const Vector& v, long long s) {
  const int L = static_cast<int>(v.size());
  Vector out(L);
  for (int j = 0; j < L; ++j) out[j] = v[wrap_index(j - s, L)];
  return out;
}

// Circulant matrix whose first column is v; column j equals R_j v.
inline Matrix circulant(const Vector& v) {
  const int L = static_cast<int>(v.size());
  Matrix c(L, L);
  for (int j = 0; j < L; ++j)
    for (int i = 0; i < L; ++i) c(i, j) = v[wrap_index(i - j, L)];
  return c;
}

class Signal {
 public:
  explicit Signal(Vector values) : values_(std::move(values)) {
    if (values_.size() < 2) throw ParameterError("signal length must be at least 2");
    if (!values_.allFinite()) throw ParameterError("signal has non-finite entries");
  }
  Signal(std::initializer_list<double> v) : Signal(Vector(Eigen::Map<const Vector>(v.begin(), v.size()))) {}

  const Vector& values() const noexcept { return values_; }
  int size() const noexcept { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }

  Signal shifted(long long s) const { return Signal(circular_shift(values_, s)); }

 private:
  Vector values_;
};

class SimplexDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit SimplexDistribution(Vector probs) : probs_(std::move(probs)) {
    if (probs_.size() < 1) throw ParameterError("distribution must be non-empty");
    if (!probs_.allFinite()) throw ParameterError("distribution has non-finite entries");
    if (probs_.minCoeff() < 0.0) throw ParameterError("distribution has negative entries");
    if (std::abs(probs_.sum() - 1.0) > kSumTolerance)
      throw ParameterError("distribution does not sum to 1");
  }
  SimplexDistribution(std::initializer_list<double> v)
      : SimplexDistribution(Vector(Eigen::Map<const Vector>(v.begin(), v.size()))) {}

  static SimplexDistribution uniform(int L) { return SimplexDistribution(Vector::Constant(L, 1.0 / L)); }
  static SimplexDistribution point_mass(int L, int at) {
    Vector p = Vector::Zero(L);
    p[wrap_index(at, L)] = 1.0;
    return SimplexDistribution(std::move(p));
  }
  // Renormalizes; for values that are a simplex up to rounding.
  static SimplexDistribution normalized(Vector w) {
    const double s = w.sum();
    if (!(s > 0.0)) throw ParameterError("cannot normalize a non-positive weight vector");
    return SimplexDistribution(w / s);
  }

  const Vector& probs() const noexcept { return probs_; }
  int size() const noexcept { return static_cast<int>(probs_.size()); }
  double operator[](int i) const { return probs_[i]; }

  SimplexDistribution shifted(long long s) const { return SimplexDistribution(circular_shift(probs_, s)); }

 private:
  Vector probs_;
};

// Group action a_s o [rho; x] = [R_{-s} rho; R_s x]; the moments are invariant under it.
struct OrbitPoint {
  Signal signal;
  SimplexDistribution distribution;

  OrbitPoint act(long long s) const { return {signal.shifted(s), distribution.shifted(-s)}; }
};

enum class NoiseKind : std::uint32_t { Homoscedastic = 0, Heteroscedastic = 1 };

struct OutlierSpec {
  double p_out = 0.0;
  double sigma2_out = 0.0;
};

/// Noise model: base Gaussian noise, optionally wrapped in an outlier mixture
/// and/or a first-K projection.
///
/// Homoscedastic:   Sigma = sigma2 * I
/// Heteroscedastic: Sigma = diag(sigma2, 2 sigma2, ..., L sigma2)
///
/// Projection can appear at most once, which the flat layout enforces.
struct NoiseModel {
  NoiseKind kind = NoiseKind::Homoscedastic;
  double sigma2 = 0.0;
  std::optional<OutlierSpec> outlier;
  std::optional<int> projection;

  static NoiseModel homoscedastic(double sigma2) { return {NoiseKind::Homoscedastic, sigma2, {}, {}}; }
  static NoiseModel heteroscedastic(double sigma2) { return {NoiseKind::Heteroscedastic, sigma2, {}, {}}; }

  NoiseModel with_outliers(double p_out, double sigma2_out) const {
    if (outlier) throw ParameterError("outlier layer already present");
    NoiseModel m = *this;
    m.outlier = OutlierSpec{p_out, sigma2_out};
    return m;
  }
  NoiseModel projected(int K) const {
    if (projection) throw ParameterError("projected models may not be nested");
    NoiseModel m = *this;
    m.projection = K;
    return m;
  }

  bool is_plain() const noexcept { return !outlier && !projection; }
  double inlier_weight() const noexcept { return outlier ? 1.0 - outlier->p_out : 1.0; }

  void validate(int L) const {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ParameterError("sigma2 must be finite and >= 0");
    if (outlier) {
      if (!(outlier->p_out >= 0.0 && outlier->p_out <= 1.0)) throw ParameterError("p_out must lie in [0, 1]");
      if (!(outlier->sigma2_out >= 0.0) || !std::isfinite(outlier->sigma2_out))
        throw ParameterError("sigma2_out must be finite and >= 0");
    }
    if (projection && (*projection < 1 || *projection > L))
      throw ParameterError("projection size K must satisfy 1 <= K <= L");
  }

  // Observation dimension r.
  int observation_dim(int L) const { return projection ? *projection : L; }

  // Diagonal of the base Sigma over the full length L.
  Vector base_variances(int L) const {
    Vector d(L);
    for (int i = 0; i < L; ++i)
      d[i] = kind == NoiseKind::Homoscedastic ? sigma2 : sigma2 * static_cast<double>(i + 1);
    return d;
  }

  // P Sigma P^T as a dense r x r matrix.
  Matrix noise_covariance(int L) const {
    const int r = observation_dim(L);
    return base_variances(L).head(r).asDiagonal();
  }

  // Constant part of M2: (1 - p) P Sigma P^T + p Sigma_out.
  Matrix second_moment_offset(int L) const {
    Matrix b = inlier_weight() * noise_covariance(L);
    if (outlier) b.diagonal().array() += outlier->p_out * outlier->sigma2_out;
    return b;
  }

  // Tag stored in observation files: bit0 heteroscedastic, bit1 outliers, bit2 projected.
  std::uint32_t tag() const noexcept {
    return static_cast<std::uint32_t>(kind) | (outlier ? 2u : 0u) | (projection ? 4u : 0u);
  }
};

inline double noise_trace(const NoiseModel& m, int L) { return m.base_variances(L).sum(); }

/// sigma^2 such that ||x||^2 / Trace(Sigma) = snr for a unit-norm signal.
inline double sigma_from_snr(double snr, NoiseKind kind, int L) {
  if (!(snr > 0.0) || !std::isfinite(snr)) throw ParameterError("snr must be positive");
  if (L < 1) throw ParameterError("length must be positive");
  const double l = static_cast<double>(L);
  return kind == NoiseKind::Homoscedastic ? 1.0 / (snr * l) : 2.0 / (snr * l * (l + 1.0));
}

struct GroundTruth {
  Signal signal;
  SimplexDistribution distribution;
  std::vector<int> shifts;
};

struct ObservationSet {
  RowMatrix data;
  NoiseModel model;
  std::uint64_t seed = 0;
  std::optional<GroundTruth> truth;

  int count() const noexcept { return static_cast<int>(data.rows()); }
  int dim() const noexcept { return static_cast<int>(data.cols()); }
};

// x ~ N(0, I), then scaled to unit norm.
inline Signal random_signal(int L, std::uint64_t key) {
  CounterRng rng(key);
  Vector x(L);
  for (int i = 0; i < L; ++i) x[i] = rng.normal();
  const double n = x.norm();
  if (n == 0.0) x[0] = 1.0;
  return Signal(n == 0.0 ? x : Vector(x / n));
}

// Uniform on the simplex via normalized exponentials.
inline SimplexDistribution random_simplex(int L, std::uint64_t key) {
  CounterRng rng(key);
  Vector e(L);
  for (int i = 0; i < L; ++i) e[i] = rng.exponential();
  return SimplexDistribution::normalized(e);
}

// Inverse-CDF lookup of a shift for u in [0, 1).
inline int sample_shift(const Vector& cdf, double u) {
  const int L = static_cast<int>(cdf.size());
  for (int s = 0; s < L; ++s)
    if (u < cdf[s]) return s;
  // u beyond the rounded total: last shift with positive mass.
  for (int s = L - 1; s > 0; --s)
    if (cdf[s] > cdf[s - 1]) return s;
  return 0;
}

/// Draws N observations. Row i only depends on (seed, stream, i).
inline ObservationSet generate_observations(const Signal& x, const SimplexDistribution& rho,
                                            const NoiseModel& model, int N, std::uint64_t seed,
                                            std::uint64_t stream = 0) {
  const int L = x.size();
  if (rho.size() != L) throw ParameterError("signal and distribution lengths differ");
  if (N < 1) throw ParameterError("need at least one observation");
  model.validate(L);
  const int r = model.observation_dim(L);

  Vector cdf(L);
  double acc = 0.0;
  for (int s = 0; s < L; ++s) cdf[s] = (acc += rho[s]);
  const Vector sd = model.base_variances(L).head(r).cwiseSqrt();
  const double sd_out = model.outlier ? std::sqrt(model.outlier->sigma2_out) : 0.0;
  const double p_out = model.outlier ? model.outlier->p_out : 0.0;

  ObservationSet obs{RowMatrix(N, r), model, seed, GroundTruth{x, rho, std::vector<int>(N)}};
  auto& shifts = obs.truth->shifts;
  for (int i = 0; i < N; ++i) {
    CounterRng rng{seed, stream, static_cast<std::uint64_t>(i)};
    const int s = sample_shift(cdf, rng.uniform());
    shifts[i] = s;
    const bool is_outlier = p_out > 0.0 && rng.uniform() < p_out;
    auto row = obs.data.row(i);
    if (is_outlier) {
      for (int j = 0; j < r; ++j) row[j] = sd_out * rng.normal();
    } else {
      for (int j = 0; j < r; ++j) row[j] = x[wrap_index(j - s, L)] + sd[j] * rng.normal();
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Analytic moments in full (non-deduplicated) form.

inline void check_lengths(const Signal& x, const SimplexDistribution& rho, const NoiseModel& model) {
  if (x.size() != rho.size()) throw ParameterError("signal and distribution lengths differ");
  model.validate(x.size());
}

/// M1 = (1 - p_out) P C_x rho
inline Vector analytic_m1(const Signal& x, const SimplexDistribution& rho, const NoiseModel& model) {
  check_lengths(x, rho, model);
  const int r = model.observation_dim(x.size());
  const Vector full = circulant(x.values()) * rho.probs();
  return model.inlier_weight() * full.head(r);
}

/// M2 = (1 - p_out) P C_x D_rho C_x^T P^T + (1 - p_out) P Sigma P^T + p_out Sigma_out
inline Matrix analytic_m2(const Signal& x, const SimplexDistribution& rho, const NoiseModel& model) {
  check_lengths(x, rho, model);
  const int L = x.size();
  const int r = model.observation_dim(L);
  const Matrix c = circulant(x.values()).topRows(r);
  Matrix m2 = model.inlier_weight() * (c * rho.probs().asDiagonal() * c.transpose());
  m2 += model.second_moment_offset(L);
  return 0.5 * (m2 + m2.transpose());
}

/// Dense symmetric third-order tensor, stored flat with (i, j, k) -> (i * r + j) * r + k.
struct Tensor3 {
  int dim = 0;
  std::vector<double> data;

  explicit Tensor3(int r) : dim(r), data(static_cast<std::size_t>(r) * r * r, 0.0) {}
  double& operator()(int i, int j, int k) { return data[(static_cast<std::size_t>(i) * dim + j) * dim + k]; }
  double operator()(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * dim + j) * dim + k];
  }
};

/// E[y (x) y (x) y] for y = R_s x + eps, eps ~ N(0, Sigma):
///   sum_s rho_s a_i a_j a_k + m_i Sigma_jk + m_j Sigma_ik + m_k Sigma_ij,
/// with a = R_s x and m = M1. Odd central Gaussian moments vanish.
inline Tensor3 analytic_m3(const Signal& x, const SimplexDistribution& rho, const NoiseModel& model) {
  check_lengths(x, rho, model);
  if (!model.is_plain()) throw UnsupportedError("third moment is only available for plain Gaussian noise");
  const int L = x.size();
  const Vector var = model.base_variances(L);
  const Vector m = analytic_m1(x, rho, model);
  Tensor3 t(L);
  for (int s = 0; s < L; ++s) {
    if (rho[s] == 0.0) continue;
    const Vector a = circular_shift(x.values(), s);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) {
        const double w = rho[s] * a[i] * a[j];
        for (int k = 0; k < L; ++k) t(i, j, k) += w * a[k];
      }
  }
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      for (int k = 0; k < L; ++k) {
        double extra = 0.0;
        if (j == k) extra += m[i] * var[j];
        if (i == k) extra += m[j] * var[i];
        if (i == j) extra += m[k] * var[i];
        t(i, j, k) += extra;
      }
  return t;
}

}  // namespace gmmra
