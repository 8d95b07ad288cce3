#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <sstream>
#include <string>

#include "snse/snapshot.hpp"

using namespace snse;

namespace {

Snapshot sample(int lmax) {
  Snapshot s;
  s.time = 0.1 + 0.2;  // not exactly representable as written
  s.spectrum = Spectrum::ricci_shifted;
  s.v = random_stream_field(lmax, 3, 0);
  s.z = random_stream_field(lmax, 3, 1);
  s.v(1, 1) = Complex(-0.0, std::numeric_limits<double>::denorm_min());
  return s;
}

std::string bytes_of(const Snapshot& s) {
  std::ostringstream os(std::ios::binary);
  write_snapshot(os, s);
  return os.str();
}

}  // namespace

TEST(Snapshot, RoundTripIsBitwise) {
  for (int lmax : {1, 5, 16}) {
    const auto s = sample(lmax);
    const std::string bytes = bytes_of(s);
    std::istringstream in(bytes, std::ios::binary);
    const auto back = read_snapshot(in);
    EXPECT_EQ(back, s);
    EXPECT_EQ(bytes_of(back), bytes);
    EXPECT_TRUE(std::signbit(back.v(1, 1).real()));
  }
}

TEST(Snapshot, LayoutMatchesDocumentedFormat) {
  const auto s = sample(2);
  const std::string b = bytes_of(s);
  // magic, version, lmax, spectrum flag, time, 2 fields x 5 modes x 16 bytes
  ASSERT_EQ(b.size(), 4u + 4u + 4u + 1u + 8u + 2u * 5u * 16u);
  EXPECT_EQ(b.substr(0, 4), "SNS2");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 1u);
  double t = 0.0;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[13 + i])) << (8 * i);
  std::memcpy(&t, &bits, 8);
  EXPECT_EQ(t, s.time);
  // first coefficient of v: (l, m) = (1, 0), real part
  double re = 0.0;
  bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[21 + i])) << (8 * i);
  std::memcpy(&re, &bits, 8);
  EXPECT_EQ(re, s.v(1, 0).real());
}

TEST(Snapshot, RejectsCorruptInput) {
  const std::string good = bytes_of(sample(3));
  auto read = [](std::string bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_snapshot(in);
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(read(bad), IoError);
  bad = good;
  bad[4] = 9;
  EXPECT_THROW(read(bad), IoError);
  EXPECT_THROW(read(good.substr(0, good.size() - 3)), IoError);
  EXPECT_THROW(read(good.substr(0, 10)), IoError);
  EXPECT_THROW(read(good + "x"), IoError);
  bad = good;
  bad[12] = 7;
  EXPECT_THROW(read(bad), IoError);
  EXPECT_THROW(read_snapshot(std::string("/nonexistent/snap.bin")), IoError);
}
