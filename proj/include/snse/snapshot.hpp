#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "snse/error.hpp"
#include "snse/operators.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

/// Binary state file, little-endian:
///   "SNS2", u32 version, u32 lmax, u8 spectrum, f64 time,
///   then v and z as (re, im) f64 pairs for l = 1..lmax, m = 0..l.
struct Snapshot {
  static constexpr std::array<char, 4> magic{'S', 'N', 'S', '2'};
  static constexpr std::uint32_t version = 1;

  double time = 0.0;
  Spectrum spectrum = Spectrum::paper;
  SpectralField v;
  SpectralField z;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

namespace detail {

template <class U>
void put_le(std::ostream& os, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw IoError("snapshot: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void put_f64(std::ostream& os, double x) { put_le(os, std::bit_cast<std::uint64_t>(x)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

}  // namespace detail

inline void write_snapshot(std::ostream& os, const Snapshot& s) {
  if (s.v.lmax() < 1) throw DomainError("snapshot: lmax must be >= 1");
  s.v.check_compatible(s.z);
  os.write(Snapshot::magic.data(), Snapshot::magic.size());
  detail::put_le<std::uint32_t>(os, Snapshot::version);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.v.lmax()));
  detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.spectrum));
  detail::put_f64(os, s.time);
  for (const SpectralField* f : {&s.v, &s.z})
    for (int l = 1; l <= f->lmax(); ++l)
      for (int m = 0; m <= l; ++m) {
        detail::put_f64(os, (*f)(l, m).real());
        detail::put_f64(os, (*f)(l, m).imag());
      }
  if (!os) throw IoError("snapshot: write failed");
}

inline Snapshot read_snapshot(std::istream& is) {
  std::array<char, 4> tag{};
  if (!is.read(tag.data(), tag.size())) throw IoError("snapshot: truncated file");
  if (tag != Snapshot::magic) throw IoError("snapshot: bad magic");
  if (const auto ver = detail::get_le<std::uint32_t>(is); ver != Snapshot::version)
    throw IoError("snapshot: unsupported version " + std::to_string(ver));
  const auto lmax = detail::get_le<std::uint32_t>(is);
  if (lmax < 1 || lmax > 4096) throw IoError("snapshot: implausible lmax " + std::to_string(lmax));
  const auto flag = detail::get_le<std::uint8_t>(is);
  if (flag > 1) throw IoError("snapshot: unknown spectrum flag");
  Snapshot s;
  s.spectrum = static_cast<Spectrum>(flag);
  s.time = detail::get_f64(is);
  s.v = SpectralField::stream(static_cast<int>(lmax));
  s.z = SpectralField::stream(static_cast<int>(lmax));
  for (SpectralField* f : {&s.v, &s.z})
    for (int l = 1; l <= f->lmax(); ++l)
      for (int m = 0; m <= l; ++m) {
        const double re = detail::get_f64(is);
        const double im = detail::get_f64(is);
        (*f)(l, m) = Complex(re, im);
      }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("snapshot: trailing bytes");
  return s;
}

inline void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_snapshot(os, s);
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_snapshot(is);
}

}  // namespace snse
