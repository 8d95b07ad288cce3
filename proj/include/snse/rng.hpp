#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace snse {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// What a draw is used for; part of the counter so streams never overlap.
enum class Purpose : std::uint32_t {
  subordinator = 1,
  gaussian = 2,
  field = 3,
  test = 4,
};

/// Stateless counter-based generator.
///
/// Every draw is a pure function of (seed, stream, purpose, index, slot), so
/// any subset of draws can be produced on any worker in any order with
/// identical results. `stream` separates Monte-Carlo paths; `index` is a time
/// counter (sub-step number); `slot` is a mode index.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

  std::array<std::uint32_t, 4> raw(Purpose purpose, std::uint64_t index, std::uint32_t slot) const {
    return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), slot,
                       static_cast<std::uint32_t>(purpose)},
                      {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
  }

  /// Two independent uniforms in the open interval (0, 1).
  std::array<double, 2> uniforms(Purpose purpose, std::uint64_t index, std::uint32_t slot) const {
    const auto r = raw(purpose, index, slot);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    return {to_open_unit(a), to_open_unit(b)};
  }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normals(Purpose purpose, std::uint64_t index, std::uint32_t slot) const {
    const auto [u1, u2] = uniforms(purpose, index, slot);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  std::uint64_t key() const { return key_; }

 private:
  static double to_open_unit(std::uint64_t x) { return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t key_ = 0;
};

}  // namespace snse
