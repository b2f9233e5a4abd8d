#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace c2v {

// Counter-based random numbers. A stream is identified by a 64-bit key; the
// n-th draw of a stream is a pure function of (key, n), so work can be split
// across threads in any way without changing the values produced.

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value + 0x632be59bd9b4e019ull));
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  /// Named sub-stream: derive(seed, "assd", 3) etc.
  template <class... Ids>
  static constexpr CounterRng derive(std::uint64_t seed, std::string_view purpose, Ids... ids) noexcept {
    std::uint64_t k = hash_combine(seed, hash_tag(purpose));
    ((k = hash_combine(k, static_cast<std::uint64_t>(ids))), ...);
    return CounterRng(k);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ ^ mix64(counter));
  }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on draws (2n, 2n+1).
  double normal(std::uint64_t counter) const noexcept {
    const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n).
  constexpr std::uint64_t below(std::uint64_t counter, std::uint64_t n) const noexcept {
    return static_cast<std::uint64_t>(uniform(counter) * static_cast<double>(n));
  }

 private:
  std::uint64_t key_;
};

/// Sequential convenience wrapper over a CounterRng stream.
class RngStream {
 public:
  explicit RngStream(CounterRng rng) noexcept : rng_(rng) {}

  double uniform() noexcept { return rng_.uniform(next_++); }
  double normal() noexcept { return rng_.normal(next_++); }
  std::uint64_t below(std::uint64_t n) noexcept { return rng_.below(next_++, n); }

 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

}  // namespace c2v
