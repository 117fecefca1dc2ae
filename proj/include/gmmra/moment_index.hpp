#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "gmmra/errors.hpp"

namespace gmmra {

struct MultiIndex {
  int order = 1;  // 1, 2 or 3
  std::array<int, 3> idx{0, 0, 0};

  std::string to_string() const {
    std::string s = "(";
    for (int a = 0; a < order; ++a) {
      if (a) s += ',';
      s += std::to_string(idx[a]);
    }
    return s + ")";
  }
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// Canonical flat layout of deduplicated moments.
///
/// Block order is M1, M2, M3. Within a block entries are the sorted
/// multi-indices (i), (i <= j), (i <= j <= k) in lexicographic order. Every
/// module uses this layout, and exported files depend on it.
class MomentIndexMap {
 public:
  MomentIndexMap(int dim, int order) : dim_(dim), order_(order) {
    if (dim < 1) throw ParameterError("moment dimension must be positive");
    if (order != 2 && order != 3) throw ParameterError("moment order must be 2 or 3");
    entries_.reserve(count(dim, order));
    for (int i = 0; i < dim; ++i) entries_.push_back({1, {i, 0, 0}});
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) entries_.push_back({2, {i, j, 0}});
    if (order == 3)
      for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j)
          for (int k = j; k < dim; ++k) entries_.push_back({3, {i, j, k}});
  }

  static int count(int dim, int order) {
    int q = dim + dim * (dim + 1) / 2;
    if (order == 3) q += dim * (dim + 1) * (dim + 2) / 6;
    return q;
  }

  int dim() const noexcept { return dim_; }
  int order() const noexcept { return order_; }
  int size() const noexcept { return static_cast<int>(entries_.size()); }
  const MultiIndex& operator[](int flat) const { return entries_[flat]; }
  const std::vector<MultiIndex>& entries() const noexcept { return entries_; }

  int m1_offset() const noexcept { return 0; }
  int m2_offset() const noexcept { return dim_; }
  int m3_offset() const noexcept { return dim_ + dim_ * (dim_ + 1) / 2; }

  // Flat position of a multi-index given in any order.
  int flat_index(MultiIndex m) const {
    std::sort(m.idx.begin(), m.idx.begin() + m.order);
    for (int a = 0; a < m.order; ++a)
      if (m.idx[a] < 0 || m.idx[a] >= dim_) throw ParameterError("multi-index out of range");
    const int n = dim_;
    const int i = m.idx[0], j = m.idx[1], k = m.idx[2];
    switch (m.order) {
      case 1:
        return i;
      case 2:
        // rows before i hold n + (n-1) + ... + (n-i+1) entries
        return m2_offset() + i * n - i * (i - 1) / 2 + (j - i);
      case 3: {
        if (order_ != 3) throw ParameterError("map does not hold third-order entries");
        int pos = m3_offset();
        for (int a = 0; a < i; ++a) pos += (n - a) * (n - a + 1) / 2;
        for (int b = i; b < j; ++b) pos += n - b;
        return pos + (k - j);
      }
      default:
        throw ParameterError("invalid multi-index order");
    }
  }

  friend bool operator==(const MomentIndexMap& a, const MomentIndexMap& b) {
    return a.dim_ == b.dim_ && a.order_ == b.order_;
  }

 private:
  int dim_;
  int order_;
  std::vector<MultiIndex> entries_;
};

}  // namespace gmmra
