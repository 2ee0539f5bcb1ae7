#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>

namespace ctsim {

__extension__ typedef __int128 Int128;
__extension__ typedef unsigned __int128 UInt128;

/// Decimal fixed-point number with 10^-12 resolution.
///
/// Every trust score, weight, stake share and difficulty is a Fixed so that
/// replaying a chain reproduces the exact same state on any machine. The
/// helpers below evaluate each formula at full precision and round once,
/// toward negative infinity unless noted.
class Fixed {
 public:
  static constexpr std::int64_t kScale = 1'000'000'000'000;

  constexpr Fixed() = default;

  static constexpr Fixed from_raw(std::int64_t raw) { return Fixed(raw); }
  static constexpr Fixed zero() { return Fixed(0); }
  static constexpr Fixed one() { return Fixed(kScale); }
  static constexpr Fixed ulp() { return Fixed(1); }

  /// Nearest representable value.
  static Fixed from_double(double value);

  /// floor(num / den) in Fixed units; den must be positive.
  static Fixed ratio(std::int64_t num, std::int64_t den);

  /// Parses a plain decimal literal such as "0.325" exactly; throws on bad input.
  static Fixed parse(const std::string& text);

  constexpr std::int64_t raw() const { return raw_; }
  double to_double() const { return static_cast<double>(raw_) / static_cast<double>(kScale); }

  /// Exact decimal rendering with all twelve fractional digits.
  std::string str() const;

  constexpr bool in_unit_interval() const { return raw_ >= 0 && raw_ <= kScale; }

  constexpr Fixed clamp(Fixed lo, Fixed hi) const {
    return raw_ < lo.raw_ ? lo : (raw_ > hi.raw_ ? hi : *this);
  }

  friend constexpr Fixed operator+(Fixed a, Fixed b) { return Fixed(a.raw_ + b.raw_); }
  friend constexpr Fixed operator-(Fixed a, Fixed b) { return Fixed(a.raw_ - b.raw_); }
  Fixed& operator+=(Fixed other) {
    raw_ += other.raw_;
    return *this;
  }

  friend constexpr auto operator<=>(Fixed, Fixed) = default;

 private:
  constexpr explicit Fixed(std::int64_t raw) : raw_(raw) {}

  std::int64_t raw_ = 0;
};

/// floor(a * b)
Fixed mul(Fixed a, Fixed b);

/// floor((a + b) / 2)
Fixed halve_sum(Fixed a, Fixed b);

/// floor(sum / count); zero for an empty span.
Fixed mean(std::span<const Fixed> values);

/// floor of a signed 128-bit quotient (den > 0).
std::int64_t floor_div(Int128 num, Int128 den);

/// Quotient rounded to nearest, halves upward (den > 0).
std::int64_t round_div(Int128 num, Int128 den);

}  // namespace ctsim
