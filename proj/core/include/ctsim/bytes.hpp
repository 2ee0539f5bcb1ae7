#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctsim {

using Bytes = std::vector<std::uint8_t>;

/// Simulated wall-clock time in milliseconds.
using Millis = std::int64_t;

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Parses lowercase or uppercase hex; throws std::invalid_argument on bad input.
Bytes from_hex(std::string_view hex);

inline std::span<const std::uint8_t> as_bytes(std::string_view text) {
  return {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()};
}

/// Fixed-length byte string with a phantom tag so digests, addresses and keys
/// cannot be mixed up.
template <std::size_t N, typename Tag>
struct ByteArray {
  std::array<std::uint8_t, N> bytes{};

  static constexpr std::size_t size() { return N; }

  static ByteArray from_span(std::span<const std::uint8_t> in) {
    if (in.size() != N) {
      throw std::invalid_argument("byte array length mismatch");
    }
    ByteArray out;
    std::copy(in.begin(), in.end(), out.bytes.begin());
    return out;
  }

  static ByteArray from_hex(std::string_view hex) {
    return from_span(ctsim::from_hex(hex));
  }

  bool is_zero() const {
    return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
  }

  std::string hex() const { return to_hex(bytes); }
  std::span<const std::uint8_t> span() const { return bytes; }

  friend auto operator<=>(const ByteArray&, const ByteArray&) = default;
  friend bool operator==(const ByteArray&, const ByteArray&) = default;
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Big-endian, length-prefixed writer used for every canonical encoding.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v, 2); }
  void u32(std::uint32_t v) { put_be(v, 4); }
  void u64(std::uint64_t v) { put_be(v, 8); }
  void i64(std::int64_t v) { put_be(static_cast<std::uint64_t>(v), 8); }

  void raw(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }

  template <std::size_t N, typename Tag>
  void fixed(const ByteArray<N, Tag>& value) {
    raw(value.bytes);
  }

  /// u32 length followed by the bytes.
  void var(std::span<const std::uint8_t> data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  void put_be(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t u64() { return get_be(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_be(8)); }

  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T fixed() {
    return T::from_span(raw(T::size()));
  }

  Bytes var(std::size_t max_len = 1u << 24) {
    const std::uint32_t len = u32();
    if (len > max_len) {
      throw DecodeError("length prefix exceeds limit");
    }
    auto span = raw(len);
    return Bytes(span.begin(), span.end());
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

  void expect_done() const {
    if (!done()) {
      throw DecodeError("trailing bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw DecodeError("unexpected end of input");
    }
  }

  std::uint64_t get_be(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v = (v << 8) | data_[pos_++];
    }
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace ctsim
