#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace bkp {

inline constexpr const char* kVersion = "0.1.0";

/// FNV-1a 64-bit; used to fingerprint effective configurations in the
/// reproducibility header and in reports.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& data) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

}  // namespace bkp
