#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace igda {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b));
}

/// Seed of the k-th run in a batch derived from the batch seed.
constexpr std::uint64_t derive_run_seed(std::uint64_t base, std::uint64_t run) noexcept {
  return mix64(base, run + 1);
}

}  // namespace igda
