#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mdeeg {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of stream keys.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t k : keys) s = mix64(s ^ mix64(k));
  return s;
}

/// FNV-1a over a string, used to key streams by subject id.
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Rng = std::mt19937_64;

}  // namespace mdeeg
