#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace glsm {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A pure function of (key, counter): any draw can be produced independently
/// of every other draw, which keeps parallel simulation order-independent.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Stream tags occupying the last counter word, so independent uses of one seed never collide.
enum class Stream : std::uint32_t {
  kBrownian = 0,
  kHeston = 1,
  kTest = 7,
};

/// Two independent standard normals keyed by (seed, stream, a, b, c).
/// Box-Muller on two 53-bit uniforms in (0, 1].
inline std::array<double, 2> normal_pair(std::uint64_t seed, Stream stream, std::uint32_t a,
                                         std::uint32_t b, std::uint32_t c) {
  const auto out = Philox4x32::generate({a, b, c, static_cast<std::uint32_t>(stream)},
                                        Philox4x32::key_from_seed(seed));
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const std::uint64_t w0 = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t w1 = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double u1 = (static_cast<double>(w0 >> 11) + 1.0) * kScale;
  const double u2 = static_cast<double>(w1 >> 11) * kScale;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace glsm
