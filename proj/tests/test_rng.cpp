#include "flowseg/rng.hpp"

#include <doctest.h>

#include <cmath>

using flowseg::Rng;

TEST_CASE("same seed replays the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += a.next() == b.next();
  CHECK(equal == 0);
}

TEST_CASE("uniform stays in [0,1) and below(n) in range") {
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(13) < 13);
  }
}

TEST_CASE("split streams are independent of draw position") {
  Rng root(99);
  root.next();
  root.next();
  Rng child_after = root.split(5);
  Rng child_fresh = Rng(99).split(5);
  for (int i = 0; i < 32; ++i) CHECK(child_after.next() == child_fresh.next());

  Rng sibling = Rng(99).split(6);
  CHECK(sibling.next() != Rng(99).split(5).next());
}

TEST_CASE("normal draws have sane first moments") {
  Rng r(1234);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}
