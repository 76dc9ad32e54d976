#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fasvit/common.hpp"

namespace fasvit {

// Little-endian writer/reader for the binary container formats. The reader
// tracks its byte offset so parse errors can report where they happened.
class ByteWriter {
 public:
  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    le(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

 private:
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
      buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}
  explicit ByteReader(const std::vector<std::uint8_t>& v, std::string what = "buffer")
      : ByteReader(v.data(), v.size(), std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }
  bool done() const { return pos_ == size_; }

  void raw(void* out, std::size_t n, const char* field) {
    need(n, field);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return data_[pos_++];
  }
  std::uint16_t u16(const char* field) { return le<std::uint16_t>(field); }
  std::uint32_t u32(const char* field) { return le<std::uint32_t>(field); }
  std::uint64_t u64(const char* field) { return le<std::uint64_t>(field); }
  std::int32_t i32(const char* field) { return static_cast<std::int32_t>(le<std::uint32_t>(field)); }
  float f32(const char* field) {
    const std::uint32_t bits = le<std::uint32_t>(field);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* field) {
    const std::uint64_t bits = le<std::uint64_t>(field);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(const char* field) {
    const std::uint32_t n = u32(field);
    need(n, field);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(what_ + ": " + msg, static_cast<long long>(pos_));
  }

 private:
  void need(std::size_t n, const char* field) {
    if (size_ - pos_ < n)
      throw IoError(what_ + ": truncated while reading " + field,
                    static_cast<long long>(pos_));
  }
  template <typename U>
  U le(const char* field) {
    need(sizeof(U), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace fasvit
