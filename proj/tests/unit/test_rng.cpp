#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "crlprune/rng.hpp"

using crlprune::Rng;

TEST_CASE("same seed gives identical streams") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams are independent of parent draws") {
  Rng a(7);
  Rng b(7);
  a.next_u64();  // advancing the parent must not change a split stream
  Rng sa = a.split("child");
  Rng sb = b.split("child");
  for (int i = 0; i < 10; ++i) CHECK(sa.next_u64() == sb.next_u64());

  Rng other = a.split("other");
  CHECK(other.next_u64() != a.split("child").next_u64());
}

TEST_CASE("uniform stays in [0,1) and is not constant") {
  Rng rng(3);
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.05);
  CHECK(hi > 0.95);
}

TEST_CASE("normal draws have roughly unit variance") {
  Rng rng(11);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.03);
  CHECK(std::fabs(var - 1.0) < 0.05);
}
