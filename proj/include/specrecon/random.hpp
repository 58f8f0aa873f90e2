#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace specrecon {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every output block
/// is a pure function of (key, counter), so draws can be addressed directly by
/// (seed, row, column) and never depend on evaluation order or thread count.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit constexpr Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  constexpr Block operator()(Block ctr) const noexcept {
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  std::array<std::uint32_t, 2> key_;
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of trial `trial` under `master`. Distinct trials get decorrelated keys.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial) noexcept {
  return splitmix64(master ^ splitmix64(trial ^ 0x5350524353454544ull));
}

/// Uniform in the open interval (0, 1) from 53 random bits.
constexpr double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Two independent standard normals (Box-Muller, exact) addressed by a 64-bit row
/// and a 32-bit slot under `seed`.
inline std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t row,
                                             std::uint32_t slot, std::uint32_t stream = 0) noexcept {
  const Philox4x32 gen(seed);
  const auto out = gen({static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32), slot, stream});
  const double u1 = to_open_unit(out[0], out[1]);
  const double u2 = to_open_unit(out[2], out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Standard normal at (seed, row, column).
inline double normal_at(std::uint64_t seed, std::uint64_t row, std::uint64_t column) noexcept {
  const auto [a, b] = normal_pair(seed, row, static_cast<std::uint32_t>(column / 2));
  return (column % 2 == 0) ? a : b;
}

/// Sequential stream of normals/uniforms for auxiliary draws (random problem
/// generators, i.i.d. ground-truth realizations). Deterministic in (seed, stream).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream) noexcept : seed_(seed), stream_(stream) {}

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const auto [a, b] = normal_pair(seed_, counter_++, 0, stream_);
    spare_ = b;
    has_spare_ = true;
    return a;
  }

  double uniform() noexcept {
    const Philox4x32 gen(seed_);
    const auto out = gen({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                          1u, stream_});
    ++counter_;
    return to_open_unit(out[0], out[1]);
  }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace specrecon
