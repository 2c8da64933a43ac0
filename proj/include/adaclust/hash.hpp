#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace adaclust {

/// 64-bit FNV-1a, used for config fingerprints and artifact hashes.
class Fnv1a {
 public:
  Fnv1a& update(std::span<const unsigned char> bytes) noexcept {
    for (unsigned char b : bytes) {
      state_ ^= b;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& update(std::string_view s) noexcept {
    return update({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
  }
  Fnv1a& update(std::span<const double> values) noexcept {
    const auto bytes = std::as_bytes(values);
    return update({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
  }

  std::uint64_t digest() const noexcept { return state_; }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(std::string_view s) { return Fnv1a{}.update(s).hex(); }

}  // namespace adaclust
