#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fasvit {

// Thrown when a caller breaks a documented API contract (e.g. feeding a
// spoof sample to a live-only routine). Distinct from invalid-argument
// errors so callers can map them to different exit codes.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// File or stream level failure. `offset` is the byte position at which the
// problem was detected, or -1 when it does not apply.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg, long long offset = -1)
      : std::runtime_error(offset >= 0 ? msg + " (byte offset " + std::to_string(offset) + ")"
                                       : msg),
        offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

// Non-finite values or other numeric breakdown during computation.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, used for content fingerprints in reports and golden-image tests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

}  // namespace fasvit
