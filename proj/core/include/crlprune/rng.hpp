#pragma once

#include <cstdint>
#include <string_view>

namespace crlprune {

// Counter-based generator: draw i from stream k is mix(k + i * golden).
// split() derives an independent stream key, so every component of a run
// (init, batch sampling, action noise, ...) owns its own stream while the
// whole experiment stays reproducible from a single seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

  std::uint64_t next_u64() { return mix(key_ + ++counter_ * kGolden); }

  Rng split(std::uint64_t label) const {
    return Rng(FromKey{}, mix(key_ ^ mix(label + kGolden)));
  }
  Rng split(std::string_view label) const { return split(hash(label)); }

  // uniform on [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; one draw consumes two uniforms
  double normal();

  // uniform on {0, ..., n-1}; n must be positive
  std::size_t uniform_index(std::size_t n) { return next_u64() % n; }

  static std::uint64_t mix(std::uint64_t z);
  static std::uint64_t hash(std::string_view s);

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace crlprune
