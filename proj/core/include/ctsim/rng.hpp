#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>

namespace ctsim {

/// Seeded generator. Only the engine comes from <random>: the standard
/// distributions are implementation-defined, so bounded draws are done here
/// to keep runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) {
      x = engine_();
    }
    return x % bound;
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  void fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t word = engine_();
      for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
        out[i] = static_cast<std::uint8_t>(word >> (8 * b));
      }
    }
  }

  std::array<std::uint8_t, 32> seed32() {
    std::array<std::uint8_t, 32> out{};
    fill(out);
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ctsim
