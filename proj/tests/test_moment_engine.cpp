#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "gmmra/gmmra.hpp"
#include "test_support.hpp"

using namespace gmmra;
using oracle::Random;

namespace {

ObservationSet from_rows(const RowMatrix& data) {
  return ObservationSet{data, NoiseModel::homoscedastic(0.0), 0, std::nullopt};
}

double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(MomentIndexMap, CountsAndOrdering) {
  EXPECT_EQ(MomentIndexMap(15, 2).size(), 15 + 120);
  EXPECT_EQ(MomentIndexMap(15, 3).size(), 15 + 120 + 680);
  const MomentIndexMap m(2, 2);
  ASSERT_EQ(m.size(), 5);
  EXPECT_EQ(m[0].to_string(), "(0)");
  EXPECT_EQ(m[1].to_string(), "(1)");
  EXPECT_EQ(m[2].to_string(), "(0,0)");
  EXPECT_EQ(m[3].to_string(), "(0,1)");
  EXPECT_EQ(m[4].to_string(), "(1,1)");
  EXPECT_THROW(MomentIndexMap(3, 4), ParameterError);
  EXPECT_THROW(MomentIndexMap(0, 2), ParameterError);
}

TEST(MomentIndexMap, FlatIndexIsBijectiveAndSorted) {
  for (int dim : {1, 2, 5, 8}) {
    const MomentIndexMap m(dim, 3);
    for (int e = 0; e < m.size(); ++e) {
      MultiIndex mi = m[e];
      EXPECT_EQ(m.flat_index(mi), e);
      std::reverse(mi.idx.begin(), mi.idx.begin() + mi.order);
      EXPECT_EQ(m.flat_index(mi), e);
      if (e > 0 && m[e - 1].order == mi.order) {
        const auto& a = m[e - 1].idx;
        const auto& b = m[e].idx;
        EXPECT_TRUE(std::lexicographical_compare(a.begin(), a.begin() + mi.order, b.begin(), b.begin() + mi.order));
      }
    }
  }
}

TEST(FeatureVector, Examples) {
  const MomentIndexMap m(2, 2);
  EXPECT_EQ(feature_vector(Vector((Vector(2) << 1, 0).finished()), m).values,
            (Vector(5) << 1, 0, 1, 0, 0).finished());
  EXPECT_TRUE(feature_vector(Vector(Vector::Zero(4)), MomentIndexMap(4, 3)).values.isZero(0.0));
  EXPECT_THROW(feature_vector(Vector(Vector::Zero(3)), m), ParameterError);
}

TEST(FeatureVector, MatchesDenseTensor) {
  Random rnd(1);
  const MomentIndexMap m(3, 3);
  for (int rep = 0; rep < 10; ++rep) {
    Vector y(3);
    for (int i = 0; i < 3; ++i) y[i] = rnd.normal();
    const Vector f = feature_vector(y, m).values;
    const auto t3 = oracle::dense_power3(y);
    for (int e = 0; e < m.size(); ++e) {
      const auto& mi = m[e];
      double expect = 0.0;
      if (mi.order == 1) expect = y[mi.idx[0]];
      if (mi.order == 2) expect = (y * y.transpose())(mi.idx[0], mi.idx[1]);
      if (mi.order == 3) expect = t3[(mi.idx[0] * 3 + mi.idx[1]) * 3 + mi.idx[2]];
      EXPECT_DOUBLE_EQ(f[e], expect);
    }
  }
}

TEST(EmpiricalMoments, SingleRowAndConstantRows) {
  const MomentIndexMap m(3, 2);
  RowMatrix one(1, 3);
  one << 0.5, -1.0, 2.0;
  EXPECT_EQ(empirical_moments(from_rows(one), m).values, feature_vector(Vector(one.row(0).transpose()), m).values);

  const RowMatrix c = RowMatrix::Constant(17, 3, 1.5);
  const Vector v = empirical_moments(from_rows(c), m).values;
  for (int e = 0; e < 3; ++e) EXPECT_DOUBLE_EQ(v[e], 1.5);
  for (int e = 3; e < m.size(); ++e) EXPECT_DOUBLE_EQ(v[e], 2.25);

  EXPECT_THROW(empirical_moments(from_rows(RowMatrix(0, 3)), m), ParameterError);
  EXPECT_THROW(empirical_moments(from_rows(RowMatrix::Zero(4, 2)), m), ParameterError);
}

TEST(EmpiricalMoments, NoiselessConvergesToAnalytic) {
  Random rnd(2);
  const int L = 5;
  const int N = 100000;
  const Signal x = rnd.signal(L);
  const auto rho = SimplexDistribution::uniform(L);
  const auto model = NoiseModel::homoscedastic(0.0);
  for (int order : {2, 3}) {
    const MomentIndexMap m(L, order);
    const auto obs = generate_observations(x, rho, model, N, 77);
    const MomentSummary s = accumulate_moments(obs.data, m);
    const Vector exact = analytic_moments(x, rho, model, m).values;
    for (int e = 0; e < m.size(); ++e) {
      const double se = std::sqrt(s.covariance->matrix(e, e) / N);
      EXPECT_LE(std::abs(s.moments.values[e] - exact[e]), 5.0 * se + 1e-14) << m[e].to_string();
    }
  }
}

TEST(EmpiricalCovariance, IdenticalRowsGiveZero) {
  const RowMatrix c = RowMatrix::Constant(9, 4, -0.7);
  const auto s = empirical_covariance(from_rows(c), MomentIndexMap(4, 2));
  EXPECT_LE(s.matrix.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(s.n_samples, 9);
}

TEST(EmpiricalCovariance, ScalarTextbookExample) {
  RowMatrix d(3, 1);
  d << 1, 2, 3;
  const auto s = empirical_covariance(from_rows(d), MomentIndexMap(1, 2));
  // Features (y, y^2) = (1,1), (2,4), (3,9): var y = 1, cov = 4, var y^2 = 49/3.
  EXPECT_NEAR(s.matrix(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(s.matrix(0, 1), 4.0, 1e-14);
  EXPECT_NEAR(s.matrix(1, 0), 4.0, 1e-14);
  EXPECT_NEAR(s.matrix(1, 1), 49.0 / 3.0, 1e-13);
  EXPECT_LE(rel_diff(s.matrix, oracle::two_pass_covariance(d, MomentIndexMap(1, 2))), 1e-14);
  EXPECT_THROW(empirical_covariance(from_rows(RowMatrix::Ones(1, 1)), MomentIndexMap(1, 2)), ParameterError);
}

TEST(EmpiricalCovariance, MatchesTwoPassOracle) {
  Random rnd(3);
  for (int order : {2, 3}) {
    for (int rep = 0; rep < 3; ++rep) {
      const int L = rnd.integer(3, 6);
      const int N = rnd.integer(2, 5000);
      const auto obs = generate_observations(rnd.signal(L), rnd.simplex(L), NoiseModel::heteroscedastic(0.3), N,
                                             rep + 10 * order);
      const MomentIndexMap m(L, order);
      const auto s = empirical_covariance(obs, m);
      EXPECT_LE(rel_diff(s.matrix, oracle::two_pass_covariance(obs.data, m)), 1e-8);
    }
  }
}

TEST(EmpiricalCovariance, SymmetricPsdAndFullRankWithNoise) {
  Random rnd(4);
  const int L = 6;
  const MomentIndexMap m(L, 2);
  const int N = 10 * m.size() * 4;
  const auto obs = generate_observations(rnd.signal(L), rnd.simplex(L), NoiseModel::homoscedastic(0.2), N, 5);
  const auto s = empirical_covariance(obs, m);
  EXPECT_EQ(s.matrix, s.matrix.transpose());
  const auto rep = condition_report(s.matrix);
  EXPECT_GT(rep.min_eigenvalue, 0.0);
  EXPECT_GE(rep.min_eigenvalue, -1e-8 * rep.max_eigenvalue);
  EXPECT_TRUE(std::isfinite(rep.condition_number));
  for (int e = 0; e < m.size(); ++e) EXPECT_GE(s.matrix(e, e), 0.0);
}

TEST(Accumulation, IndependentOfRowOrderChunkingAndThreads) {
  Random rnd(5);
  const int L = 5;
  const MomentIndexMap m(L, 3);
  const auto obs = generate_observations(rnd.signal(L), rnd.simplex(L), NoiseModel::homoscedastic(0.5), 7001, 8);
  const MomentSummary base = accumulate_moments(obs.data, m);

  RowMatrix permuted = obs.data;
  std::vector<int> perm(obs.count());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rnd.engine());
  for (int i = 0; i < obs.count(); ++i) permuted.row(i) = obs.data.row(perm[i]);
  const MomentSummary shuffled = accumulate_moments(permuted, m);
  EXPECT_LE(rel_diff(shuffled.moments.values, base.moments.values), 1e-9);
  EXPECT_LE(rel_diff(shuffled.covariance->matrix, base.covariance->matrix), 1e-9);

  const MomentSummary small_chunks = accumulate_moments(obs.data, m, {.chunk_rows = 37});
  EXPECT_LE(rel_diff(small_chunks.covariance->matrix, base.covariance->matrix), 1e-9);

  // Same chunking, different thread counts: identical bits.
  for (int threads : {2, 3, 8}) {
    const MomentSummary t = accumulate_moments(obs.data, m, {.threads = threads});
    EXPECT_EQ(t.moments.values, base.moments.values);
    EXPECT_EQ(t.covariance->matrix, base.covariance->matrix);
  }
}

TEST(Accumulation, RejectsNonFiniteData) {
  RowMatrix d = RowMatrix::Ones(4, 2);
  d(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(accumulate_moments(d, MomentIndexMap(2, 2)), DataError);
}

TEST(MomentFunction, MatchesFullAnalyticMoments) {
  Random rnd(6);
  for (int rep = 0; rep < 20; ++rep) {
    const int L = rnd.integer(3, 8);
    const Signal x = rnd.signal(L);
    const auto rho = rnd.simplex(L);
    const NoiseModel model = rnd.model(rep % 4, L);
    const int r = model.observation_dim(L);
    const int order = model.is_plain() ? 3 : 2;
    const MomentIndexMap m(r, order);
    const Vector v = analytic_moments(x, rho, model, m).values;
    const Vector m1 = oracle::brute_m1(x, rho, model);
    const Matrix m2 = oracle::brute_m2(x, rho, model);
    for (int e = 0; e < m.size(); ++e) {
      const auto& mi = m[e];
      if (mi.order == 1) EXPECT_NEAR(v[e], m1[mi.idx[0]], 1e-12);
      if (mi.order == 2) EXPECT_NEAR(v[e], m2(mi.idx[0], mi.idx[1]), 1e-12);
    }
    if (order == 3) {
      const Tensor3 t = analytic_m3(x, rho, model);
      for (int e = m.m3_offset(); e < m.size(); ++e) EXPECT_NEAR(v[e], t(m[e].idx[0], m[e].idx[1], m[e].idx[2]), 1e-12);
    }
  }
}

TEST(MomentFunction, VjpMatchesFiniteDifferences) {
  Random rnd(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int L = rnd.integer(3, 7);
    const NoiseModel model = rnd.model(rep % 4, L);
    const MomentIndexMap m(model.observation_dim(L), model.is_plain() ? 3 : 2);
    const MomentFunction f(L, model, m);
    Vector x(L), rho = rnd.simplex(L).probs(), u(m.size());
    for (int i = 0; i < L; ++i) x[i] = rnd.normal();
    for (int e = 0; e < m.size(); ++e) u[e] = rnd.normal();
    Vector gx, grho;
    f.vjp(x, rho, u, gx, grho);
    const double h = 1e-6;
    for (int i = 0; i < L; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = u.dot(f.evaluate(xp, rho) - f.evaluate(xm, rho)) / (2 * h);
      EXPECT_NEAR(gx[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      Vector rp = rho, rm = rho;
      rp[i] += h;
      rm[i] -= h;
      const double fr = u.dot(f.evaluate(x, rp) - f.evaluate(x, rm)) / (2 * h);
      EXPECT_NEAR(grho[i], fr, 1e-6 * std::max(1.0, std::abs(fr)));
    }
  }
}

TEST(SampleMomentFunction, ZeroAtTruthWithExactMoments) {
  Random rnd(8);
  const int L = 6;
  const Signal x = rnd.signal(L);
  const auto rho = rnd.simplex(L);
  const auto model = NoiseModel::heteroscedastic(0.1);
  const MomentIndexMap m(L, 3);
  const MomentVector exact = analytic_moments(x, rho, model, m);
  EXPECT_TRUE(g_N(x, rho, exact, model, m).values.isZero(0.0));
  EXPECT_THROW(g_N(x, rho, exact, model, MomentIndexMap(L, 2)), ParameterError);
}

TEST(SampleMomentFunction, GroupInvariant) {
  Random rnd(9);
  for (int rep = 0; rep < 10; ++rep) {
    const int L = rnd.integer(3, 9);
    const NoiseModel model = rnd.model(rep % 4, L);
    const MomentIndexMap m(model.observation_dim(L), 2);
    const auto obs = generate_observations(rnd.signal(L), rnd.simplex(L), model, 300, rep);
    const MomentVector emp = empirical_moments(obs, m);
    const OrbitPoint theta{rnd.signal(L), rnd.simplex(L)};
    const Vector base = g_N(theta.signal, theta.distribution, emp, model, m).values;
    for (int s = 0; s < L; ++s) {
      const OrbitPoint t = theta.act(s);
      EXPECT_LE((g_N(t.signal, t.distribution, emp, model, m).values - base).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

// g_N equals the average of f(theta, y_i) = analytic(theta) - features(y_i).
TEST(SampleMomentFunction, MatchesPerObservationAverage) {
  Random rnd(10);
  const int L = 4;
  const auto model = NoiseModel::homoscedastic(0.2);
  for (int order : {2, 3}) {
    const MomentIndexMap m(L, order);
    const auto obs = generate_observations(rnd.signal(L), rnd.simplex(L), model, 2000, 31);
    const Signal x = rnd.signal(L);
    const auto rho = rnd.simplex(L);
    const Vector analytic = analytic_moments(x, rho, model, m).values;
    Vector acc = Vector::Zero(m.size());
    for (int i = 0; i < obs.count(); ++i)
      acc += analytic - feature_vector(Vector(obs.data.row(i).transpose()), m).values;
    acc /= obs.count();
    const Vector g = g_N(x, rho, empirical_moments(obs, m), model, m).values;
    EXPECT_LE((g - acc).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SampleMomentFunction, ContinuousInTheta) {
  Random rnd(11);
  const int L = 5;
  const auto model = NoiseModel::homoscedastic(0.1);
  const MomentIndexMap m(L, 2);
  const auto emp = empirical_moments(generate_observations(rnd.signal(L), rnd.simplex(L), model, 500, 1), m);
  const Signal x = rnd.signal(L);
  const auto rho = rnd.simplex(L);
  Vector dir(L);
  for (int i = 0; i < L; ++i) dir[i] = rnd.normal();
  const Vector g0 = g_N(x, rho, emp, model, m).values;
  double prev_ratio = -1.0;
  for (double h : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const Vector g1 = g_N(Signal(x.values() + h * dir), rho, emp, model, m).values;
    const double ratio = (g1 - g0).norm() / h;
    EXPECT_LT(ratio, 10.0);
    if (prev_ratio > 0) EXPECT_NEAR(ratio, prev_ratio, 0.1 * prev_ratio + 1e-6);
    prev_ratio = ratio;
  }
}

TEST(MomentExport, CsvLayout) {
  const MomentIndexMap m(2, 2);
  const MomentVector v{(Vector(5) << 1, 2, 3, 4, 5).finished(), m};
  std::ostringstream os;
  write_moments_csv(os, v);
  EXPECT_EQ(os.str(), "flat_index,multi_index,value\n0,\"(0)\",1\n1,\"(1)\",2\n2,\"(0,0)\",3\n3,\"(0,1)\",4\n4,\"(1,1)\",5\n");
  std::ostringstream cs;
  write_covariance_csv(cs, CovarianceEstimate{Matrix::Identity(5, 5), 3}, m);
  EXPECT_NE(cs.str().find("0,0,\"(0)\",\"(0)\",1\n"), std::string::npos);
}
