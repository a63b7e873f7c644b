#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace crlprune {

// Welford running mean/variance with an associative merge, so per-worker
// statistics can be combined between iterations in a fixed order.
struct RunningStat {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  double variance() const {
    return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
  }

  double stddev() const { return std::sqrt(variance()); }

  // identity while fewer than two observations have been seen
  double normalize(double x) const {
    if (count < 2) return x;
    return (x - mean) / std::max(stddev(), 1e-8);
  }

  void merge(const RunningStat& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double total = static_cast<double>(count + other.count);
    const double delta = other.mean - mean;
    m2 += other.m2 + delta * delta * static_cast<double>(count) *
                         static_cast<double>(other.count) / total;
    mean += delta * static_cast<double>(other.count) / total;
    count += other.count;
  }
};

inline double update_and_normalize(RunningStat& stat, double x) {
  stat.update(x);
  return stat.normalize(x);
}

}  // namespace crlprune
