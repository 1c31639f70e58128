#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vicos {

using bytes = std::vector<std::uint8_t>;
using byte_view = std::span<const std::uint8_t>;

/// Thrown when a byte stream cannot be parsed as a protocol structure.
/// A client receiving such a stream from the server treats it as a
/// detected fault; see aip_client.
struct decode_error : std::runtime_error {
  explicit decode_error(const std::string& what) : std::runtime_error(what) {}
};

inline bytes to_bytes(std::string_view s) {
  return bytes(s.begin(), s.end());
}

inline std::string to_string(byte_view b) {
  return std::string(b.begin(), b.end());
}

inline std::string to_hex(byte_view data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

inline bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
  bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

/// Canonical binary writer: fixed-width big-endian integers and
/// length-prefixed byte fields, in fixed field order.  Hashes and
/// signatures cover these encodings, so they must stay bit-stable.
class byte_writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u32(std::uint32_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 24));
    buf_.push_back(static_cast<std::uint8_t>(v >> 16));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
  }

  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  }

  /// 32-bit length prefix followed by the raw bytes.
  void blob(byte_view data) {
    u32(static_cast<std::uint32_t>(data.size()));
    buf_.insert(buf_.end(), data.begin(), data.end());
  }

  void blob(std::string_view s) {
    blob(byte_view(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  /// Raw bytes without a prefix; only for fixed-length fields.
  void raw(byte_view data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

  const bytes& data() const { return buf_; }
  bytes take() { return std::move(buf_); }

 private:
  bytes buf_;
};

class byte_reader {
 public:
  explicit byte_reader(byte_view data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_++];
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | data_[pos_++];
    return v;
  }

  bytes blob() {
    std::uint32_t n = u32();
    need(n);
    bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  bytes raw(std::size_t n) {
    need(n);
    bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

  /// Every decoder must consume its input exactly.
  void finish() const {
    if (pos_ != data_.size()) throw decode_error("trailing bytes after message");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw decode_error("truncated input");
  }

  byte_view data_;
  std::size_t pos_ = 0;
};

}  // namespace vicos
