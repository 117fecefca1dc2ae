#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "gmmra/gmmra.hpp"
#include "test_support.hpp"

using namespace gmmra;

TEST(ObservationIo, BinaryHeaderLayout) {
  RowMatrix data(2, 3);
  data << 1.0, -2.5, 3.0, 0.0, 1e-300, -0.0;
  std::ostringstream os;
  write_observations_binary(os, data, 5u);
  const std::string bytes = os.str();
  ASSERT_EQ(bytes.size(), 4u + 12u + 6u * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "MRA1");
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3])) << 24;
  };
  EXPECT_EQ(u32(4), 2u);
  EXPECT_EQ(u32(8), 3u);
  EXPECT_EQ(u32(12), 5u);
  // 1.0 little-endian: 00 00 00 00 00 00 F0 3F
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 6]), 0xF0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 7]), 0x3F);
}

// Bit-exact round trip of random data, including signed zeros and subnormals.
TEST(ObservationIo, BinaryRoundTripIsBitExact) {
  oracle::Random rnd(1);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = rnd.integer(1, 300), r = rnd.integer(1, 16);
    RowMatrix data(n, r);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < r; ++j) data(i, j) = rnd.normal() * std::pow(10.0, rnd.integer(-300, 300));
    data(0, 0) = -0.0;
    data(n - 1, r - 1) = std::numeric_limits<double>::denorm_min();
    std::stringstream ss;
    write_observations_binary(ss, data, 3u);
    const ObservationFile back = read_observations_binary(ss);
    EXPECT_EQ(back.model_tag, 3u);
    ASSERT_EQ(back.data.rows(), n);
    ASSERT_EQ(back.data.cols(), r);
    EXPECT_EQ(std::memcmp(back.data.data(), data.data(), sizeof(double) * n * r), 0);
  }
}

TEST(ObservationIo, CsvRoundTripIsExact) {
  oracle::Random rnd(2);
  RowMatrix data(50, 4);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 4; ++j) data(i, j) = rnd.normal() / 3.0;
  std::stringstream ss;
  write_observations_csv(ss, data);
  EXPECT_EQ(read_observations_csv(ss), data);
}

TEST(ObservationIo, RejectsMalformedInput) {
  std::istringstream bad_magic("MRA2xxxxxxxxxxxx");
  EXPECT_THROW(read_observations_binary(bad_magic), IoError);
  std::string truncated("MRA1");
  truncated += std::string("\x02\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00\x00", 12);
  std::istringstream trunc(truncated);
  EXPECT_THROW(read_observations_binary(trunc), IoError);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_observations_csv(ragged), IoError);
  std::istringstream junk("1,abc\n");
  EXPECT_THROW(read_observations_csv(junk), IoError);
}

TEST(ObservationIo, FileHelpersPickFormatByExtension) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto bin = (dir / "gmmra_io_test.mra").string();
  const auto csv = (dir / "gmmra_io_test.csv").string();
  const auto obs = generate_observations(random_signal(6, 1), random_simplex(6, 2),
                                         NoiseModel::heteroscedastic(0.1).projected(4), 100, 9);
  save_observations(bin, obs.data, obs.model.tag());
  save_observations(csv, obs.data, obs.model.tag());
  const auto a = load_observations(bin);
  const auto b = load_observations(csv);
  EXPECT_EQ(a.data, obs.data);
  EXPECT_EQ(a.model_tag, obs.model.tag());
  EXPECT_EQ(b.data, obs.data);
  std::filesystem::remove(bin);
  std::filesystem::remove(csv);
  EXPECT_THROW(load_observations((dir / "does_not_exist.mra").string()), IoError);
}
