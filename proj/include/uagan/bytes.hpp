#pragma once

// Little-endian byte writer/reader shared by the wire codec and checkpoint
// files. The reader throws DecodeError carrying the offset of the first byte
// it could not consume.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uagan/error.hpp"

namespace uagan {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void raw(std::span<const std::uint8_t> s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t>& bytes() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  // `base` is added to reported offsets so nested readers can report
  // positions relative to the enclosing frame.
  explicit ByteReader(std::span<const std::uint8_t> data, std::uint64_t base = 0)
      : data_(data), base_(base) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le<std::uint8_t>()); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  // Element count prefix, validated against the bytes left so a corrupt count
  // cannot trigger a huge allocation.
  std::uint64_t count(std::size_t element_bytes) {
    const std::uint64_t at = offset();
    const std::uint64_t n = u64();
    if (element_bytes != 0 && n > remaining() / element_bytes) {
      throw DecodeError("array count " + std::to_string(n) + " exceeds payload", at);
    }
    return n;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  std::uint64_t offset() const { return base_ + pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw DecodeError("truncated input: need " + std::to_string(n) +
                            " bytes, have " + std::to_string(remaining()),
                        offset());
    }
  }

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::uint64_t base_;
  std::size_t pos_ = 0;
};

}  // namespace uagan
