#include "ctsim/fixed.hpp"

#include <cmath>
#include <stdexcept>

namespace ctsim {

std::int64_t floor_div(Int128 num, Int128 den) {
  Int128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) {
    --q;
  }
  return static_cast<std::int64_t>(q);
}

std::int64_t round_div(Int128 num, Int128 den) { return floor_div(2 * num + den, 2 * den); }

Fixed Fixed::from_double(double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("non-finite fixed-point value");
  }
  return Fixed(std::llround(value * static_cast<double>(kScale)));
}

Fixed Fixed::ratio(std::int64_t num, std::int64_t den) {
  if (den <= 0) {
    throw std::invalid_argument("Fixed::ratio requires a positive denominator");
  }
  return Fixed(floor_div(static_cast<Int128>(num) * kScale, den));
}

Fixed Fixed::parse(const std::string& text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    negative = text[i] == '-';
    ++i;
  }
  std::int64_t whole = 0;
  std::size_t whole_digits = 0;
  while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
    whole = whole * 10 + (text[i] - '0');
    if (whole > 9'000'000) {
      throw std::invalid_argument("fixed-point literal out of range: " + text);
    }
    ++i;
    ++whole_digits;
  }
  std::int64_t frac = 0;
  int frac_digits = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
      if (frac_digits == 12) {
        throw std::invalid_argument("more than 12 fractional digits: " + text);
      }
      frac = frac * 10 + (text[i] - '0');
      ++frac_digits;
      ++i;
    }
  }
  if (i != text.size() || (whole_digits == 0 && frac_digits == 0)) {
    throw std::invalid_argument("malformed fixed-point literal: " + text);
  }
  for (int d = frac_digits; d < 12; ++d) {
    frac *= 10;
  }
  const std::int64_t raw = whole * kScale + frac;
  return Fixed(negative ? -raw : raw);
}

std::string Fixed::str() const {
  const bool negative = raw_ < 0;
  const std::uint64_t magnitude =
      negative ? static_cast<std::uint64_t>(-(raw_ + 1)) + 1 : static_cast<std::uint64_t>(raw_);
  std::string frac = std::to_string(magnitude % kScale);
  frac.insert(0, 12 - frac.size(), '0');
  return (negative ? "-" : "") + std::to_string(magnitude / kScale) + "." + frac;
}

Fixed mul(Fixed a, Fixed b) {
  return Fixed::from_raw(floor_div(static_cast<Int128>(a.raw()) * b.raw(), Fixed::kScale));
}

Fixed halve_sum(Fixed a, Fixed b) {
  return Fixed::from_raw(floor_div(static_cast<Int128>(a.raw()) + b.raw(), 2));
}

Fixed mean(std::span<const Fixed> values) {
  if (values.empty()) {
    return Fixed::zero();
  }
  Int128 sum = 0;
  for (Fixed v : values) {
    sum += v.raw();
  }
  return Fixed::from_raw(floor_div(sum, static_cast<Int128>(values.size())));
}

}  // namespace ctsim
