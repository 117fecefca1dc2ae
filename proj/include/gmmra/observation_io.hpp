#pragma once

// Observation files.
//
// Binary layout (little-endian):
//   bytes 0..3   "MRA1"
//   u32          N (rows)
//   u32          r (columns)
//   u32          model tag (NoiseModel::tag)
//   f64[N * r]   row-major payload
//
// CSV: one observation per line, r comma-separated decimals, printed with
// 17 significant digits so values round-trip exactly.

#include <array>
#include <bit>
#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gmmra/errors.hpp"
#include "gmmra/mra_model.hpp"

namespace gmmra {

struct ObservationFile {
  RowMatrix data;
  std::uint32_t model_tag = 0;
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  os.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> b;
  if (!is.read(reinterpret_cast<char*>(b.data()), sizeof(T))) throw IoError("truncated observation file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

}  // namespace detail

inline void write_observations_binary(std::ostream& os, const RowMatrix& data, std::uint32_t tag) {
  os.write("MRA1", 4);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(data.rows()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(data.cols()));
  detail::put_le<std::uint32_t>(os, tag);
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j) detail::put_le<double>(os, data(i, j));
  if (!os) throw IoError("failed writing observation file");
}

inline ObservationFile read_observations_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MRA1", 4) != 0) throw IoError("not an MRA1 observation file");
  const auto n = detail::get_le<std::uint32_t>(is);
  const auto r = detail::get_le<std::uint32_t>(is);
  ObservationFile f;
  f.model_tag = detail::get_le<std::uint32_t>(is);
  f.data.resize(n, r);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < r; ++j) f.data(i, j) = detail::get_le<double>(is);
  return f;
}

inline void write_observations_csv(std::ostream& os, const RowMatrix& data) {
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) os << ',';
      os << data(i, j);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing observation CSV");
}

inline RowMatrix read_observations_csv(std::istream& is) {
  std::vector<double> values;
  long cols = -1;
  long rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    long c = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      std::string field = line.substr(pos, end - pos);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw IoError("bad number on CSV line " + std::to_string(rows + 1));
      }
      if (used == 0) throw IoError("bad number on CSV line " + std::to_string(rows + 1));
      values.push_back(v);
      ++c;
      pos = end + 1;
    }
    if (cols < 0) cols = c;
    if (c != cols) throw IoError("ragged CSV at line " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw IoError("empty observation CSV");
  RowMatrix data(rows, cols);
  std::copy(values.begin(), values.end(), data.data());
  return data;
}

inline bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

inline void save_observations(const std::string& path, const RowMatrix& data, std::uint32_t tag) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  if (has_csv_extension(path))
    write_observations_csv(os, data);
  else
    write_observations_binary(os, data, tag);
}

// The CSV form carries no model tag; tag is returned as 0xFFFFFFFF for it.
inline ObservationFile load_observations(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  if (has_csv_extension(path)) return {read_observations_csv(is), 0xFFFFFFFFu};
  return read_observations_binary(is);
}

}  // namespace gmmra
