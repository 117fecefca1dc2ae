#pragma once

// Empirical moments and the covariance of the per-observation feature
// vectors [y; y y^T; (y (x) y (x) y)], deduplicated per MomentIndexMap.
//
// Both come out of one pass over the rows. Rows are cut into fixed-size
// chunks; each chunk yields a (count, mean, centered scatter) triple and the
// triples are merged along a fixed binary tree over chunk indices. The tree
// does not depend on the thread count, so results are reproducible bit for
// bit across --threads settings.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <future>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>

#include "gmmra/errors.hpp"
#include "gmmra/moment_index.hpp"
#include "gmmra/mra_model.hpp"

namespace gmmra {

struct MomentVector {
  Vector values;
  MomentIndexMap index_map;

  int size() const noexcept { return static_cast<int>(values.size()); }
};

struct CovarianceEstimate {
  Matrix matrix;
  std::int64_t n_samples = 0;
};

// Writes the features of y into out[0..q).
inline void fill_features(std::span<const double> y, const MomentIndexMap& map, double* out) {
  const int r = map.dim();
  int e = 0;
  for (int i = 0; i < r; ++i) out[e++] = y[i];
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) out[e++] = y[i] * y[j];
  if (map.order() == 3)
    for (int i = 0; i < r; ++i)
      for (int j = i; j < r; ++j) {
        const double yij = y[i] * y[j];
        for (int k = j; k < r; ++k) out[e++] = yij * y[k];
      }
}

inline MomentVector feature_vector(std::span<const double> y, const MomentIndexMap& map) {
  if (static_cast<int>(y.size()) != map.dim()) throw ParameterError("observation length does not match index map");
  Vector f(map.size());
  fill_features(y, map, f.data());
  return {std::move(f), map};
}

inline MomentVector feature_vector(const Vector& y, const MomentIndexMap& map) {
  return feature_vector(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), map);
}

/// Mergeable (count, mean, centered scatter) state.
///
/// Only the lower triangle of the scatter is maintained.
class MomentAccumulator {
 public:
  MomentAccumulator(int q, bool with_scatter) : mean_(Vector::Zero(q)), with_scatter_(with_scatter) {
    if (with_scatter_) scatter_ = Matrix::Zero(q, q);
  }

  std::int64_t count() const noexcept { return n_; }
  const Vector& mean() const noexcept { return mean_; }

  // Consumes a block of feature rows (one observation per row).
  void add_block(const RowMatrix& features) {
    MomentAccumulator block(static_cast<int>(mean_.size()), with_scatter_);
    block.n_ = features.rows();
    if (block.n_ == 0) return;
    block.mean_ = features.colwise().sum().transpose() / static_cast<double>(block.n_);
    if (with_scatter_) {
      const Matrix centered = features.rowwise() - block.mean_.transpose();
      block.scatter_.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    }
    merge(block);
  }

  // Chan et al. pairwise update.
  void merge(const MomentAccumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    const Vector delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    if (with_scatter_) {
      scatter_ += other.scatter_;
      scatter_.selfadjointView<Eigen::Lower>().rankUpdate(delta, na * nb / n);
    }
    n_ += other.n_;
  }

  // Unbiased (divisor n - 1) covariance, full symmetric matrix.
  Matrix covariance() const {
    if (!with_scatter_) throw ParameterError("accumulator was built without covariance");
    if (n_ < 2) throw ParameterError("covariance needs at least two observations");
    Matrix s = scatter_.selfadjointView<Eigen::Lower>();
    return s / static_cast<double>(n_ - 1);
  }

 private:
  std::int64_t n_ = 0;
  Vector mean_;
  Matrix scatter_;
  bool with_scatter_;
};

struct MomentSummary {
  MomentVector moments;
  std::optional<CovarianceEstimate> covariance;
};

struct AccumulateOptions {
  bool with_covariance = true;
  int threads = 1;
  int chunk_rows = 1024;
};

namespace detail {

inline MomentAccumulator accumulate_chunk(const RowMatrix& data, const MomentIndexMap& map, int first, int last,
                                          bool with_cov) {
  const int q = map.size();
  const int r = map.dim();
  RowMatrix feats(last - first, q);
  for (int i = first; i < last; ++i)
    fill_features(std::span<const double>(data.row(i).data(), static_cast<std::size_t>(r)), map,
                  feats.row(i - first).data());
  MomentAccumulator acc(q, with_cov);
  acc.add_block(feats);
  return acc;
}

// Merges chunks [lo, hi) along a fixed balanced tree.
inline MomentAccumulator reduce_chunks(const RowMatrix& data, const MomentIndexMap& map, int lo, int hi,
                                       const AccumulateOptions& opt, int spare_threads) {
  const int rows = static_cast<int>(data.rows());
  if (hi - lo == 1) {
    const int first = lo * opt.chunk_rows;
    return accumulate_chunk(data, map, first, std::min(rows, first + opt.chunk_rows), opt.with_covariance);
  }
  const int mid = lo + (hi - lo) / 2;
  if (spare_threads > 1) {
    const int half = spare_threads / 2;
    auto left = std::async(std::launch::async, reduce_chunks, std::cref(data), std::cref(map), lo, mid,
                           std::cref(opt), half);
    MomentAccumulator right = reduce_chunks(data, map, mid, hi, opt, spare_threads - half);
    MomentAccumulator out = left.get();
    out.merge(right);
    return out;
  }
  MomentAccumulator out = reduce_chunks(data, map, lo, mid, opt, 1);
  out.merge(reduce_chunks(data, map, mid, hi, opt, 1));
  return out;
}

}  // namespace detail

/// One pass over the observations: mean feature vector and, optionally, the
/// unbiased feature covariance.
inline MomentSummary accumulate_moments(const RowMatrix& data, const MomentIndexMap& map,
                                        const AccumulateOptions& opt = {}) {
  if (data.cols() != map.dim()) throw ParameterError("observation dimension does not match index map");
  if (data.rows() < 1) throw ParameterError("empty observation set");
  if (opt.with_covariance && data.rows() < 2) throw ParameterError("covariance needs at least two observations");
  if (opt.chunk_rows < 1) throw ParameterError("chunk size must be positive");
  if (!data.allFinite()) throw DataError("observations contain non-finite values");
  const int rows = static_cast<int>(data.rows());
  const int chunks = (rows + opt.chunk_rows - 1) / opt.chunk_rows;
  const MomentAccumulator acc = detail::reduce_chunks(data, map, 0, chunks, opt, std::max(1, opt.threads));
  MomentSummary out{{acc.mean(), map}, std::nullopt};
  if (opt.with_covariance) out.covariance = CovarianceEstimate{acc.covariance(), acc.count()};
  return out;
}

inline MomentVector empirical_moments(const ObservationSet& obs, const MomentIndexMap& map, int threads = 1) {
  return accumulate_moments(obs.data, map, {.with_covariance = false, .threads = threads}).moments;
}

inline CovarianceEstimate empirical_covariance(const ObservationSet& obs, const MomentIndexMap& map,
                                               int threads = 1) {
  if (obs.count() < 2) throw ParameterError("covariance needs at least two observations");
  return *accumulate_moments(obs.data, map, {.with_covariance = true, .threads = threads}).covariance;
}

// ---------------------------------------------------------------------------
// CSV export: flat_index,multi_index,value  /  row,col,value

inline void write_moments_csv(std::ostream& os, const MomentVector& m) {
  os << "flat_index,multi_index,value\n" << std::setprecision(17);
  for (int e = 0; e < m.size(); ++e)
    os << e << ",\"" << m.index_map[e].to_string() << "\"," << m.values[e] << '\n';
}

inline void write_covariance_csv(std::ostream& os, const CovarianceEstimate& s, const MomentIndexMap& map) {
  os << "row,col,row_index,col_index,value\n" << std::setprecision(17);
  for (int i = 0; i < s.matrix.rows(); ++i)
    for (int j = 0; j < s.matrix.cols(); ++j)
      os << i << ',' << j << ",\"" << map[i].to_string() << "\",\"" << map[j].to_string() << "\","
         << s.matrix(i, j) << '\n';
}

}  // namespace gmmra
