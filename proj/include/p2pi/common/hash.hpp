#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace p2pi {

/// FNV-1a 64-bit. Used for config and raw-data fingerprints; stable across
/// platforms and runs.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

/// Fingerprint of a file's raw bytes as "fnv1a:<hex>". Throws IoError.
std::string hash_file(const std::string& path);

}  // namespace p2pi
