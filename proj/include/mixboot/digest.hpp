#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace mixboot {

// 64-bit FNV-1a, rendered as 16 lowercase hex digits. Used for provenance
// tags, not for security.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001B3ULL;
    }
    return *this;
  }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

inline std::string digest_hex(std::string_view bytes) { return Fnv1a{}.update(bytes).hex(); }

}  // namespace mixboot
