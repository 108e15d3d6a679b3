#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every draw is a
// pure function of (seed, path, slot), so simulated paths do not depend on the
// order or the thread in which they are generated.

#include <array>
#include <cstdint>

namespace popmdp {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Uniform draws for one simulated path. Slot 0 is the initial state, slot k the noise of period k.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path)),
        path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

  std::uint64_t bits(std::uint32_t slot, std::uint32_t draw = 0) const noexcept {
    const auto out = Philox4x32::generate({path_lo_, path_hi_, slot, draw}, key_);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint32_t slot, std::uint32_t draw = 0) const noexcept {
    return static_cast<double>(bits(slot, draw) >> 11) * 0x1.0p-53;
  }

 private:
  Philox4x32::Key key_;
  std::uint32_t path_lo_;
  std::uint32_t path_hi_;
};

}  // namespace popmdp
