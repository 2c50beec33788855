#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "adamcb/errors.hpp"
#include "adamcb/rng.hpp"

using namespace adamcb;

TEST_CASE("identical seeds reproduce the stream exactly") {
  SplitRng a(42);
  SplitRng b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform01() == b.uniform01());
  for (int i = 0; i < 1000; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("splits depend on seed and label, not on parent state") {
  SplitRng fresh(7);
  SplitRng advanced(7);
  for (int i = 0; i < 100; ++i) advanced.next_u64();

  SplitRng child_fresh = fresh.split("sample");
  SplitRng child_advanced = advanced.split("sample");
  CHECK(child_fresh.seed() == child_advanced.seed());
  for (int i = 0; i < 100; ++i) CHECK(child_fresh.next_u64() == child_advanced.next_u64());
}

TEST_CASE("different labels and different seeds give different streams") {
  SplitRng root(7);
  SplitRng a = root.split("init");
  SplitRng b = root.split("sample");
  CHECK(a.seed() != b.seed());
  CHECK(a.next_u64() != b.next_u64());

  CHECK(SplitRng(1).split("x").seed() != SplitRng(2).split("x").seed());
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  SplitRng rng(11);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform(lo, hi) respects the range") {
  SplitRng rng(12);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-3.0, 5.0);
    CHECK(u >= -3.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("uniform_int covers its range without bias artifacts") {
  SplitRng rng(13);
  std::vector<int> counts(10, 0);
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) {
    const int v = rng.uniform_int(10);
    REQUIRE(v >= 0);
    REQUIRE(v < 10);
    ++counts[v];
  }
  // Expected 5000 per bucket, sigma ~ 67; +/-600 is a ~9 sigma corridor.
  for (const int c : counts) {
    CHECK(c > 4400);
    CHECK(c < 5600);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), ContractError);
  CHECK_THROWS_AS(rng.uniform_int(-3), ContractError);
}

TEST_CASE("normal draws have the right first two moments") {
  SplitRng rng(14);
  const int draws = 100000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / draws;
  const double var = sumsq / draws - mean * mean;
  CHECK(std::abs(mean) < 0.02);       // ~6 sigma at n = 1e5
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("seed accessor reports the construction seed") {
  CHECK(SplitRng(987654321).seed() == 987654321);
}
