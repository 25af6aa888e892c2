#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rwcre/rng.hpp"

using namespace rwcre;

TEST(Rng, SameKeySameSequence) {
  Stream a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, SeekReplaysOutputs) {
  Stream a(7);
  a();
  a();
  const auto third = a();
  a.seek(2);
  EXPECT_EQ(a(), third);
}

TEST(Rng, DerivedKeysAreDistinct) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    keys.insert(derive_key(1, "walk", i));
    keys.insert(derive_key(1, "env", i));
  }
  EXPECT_EQ(keys.size(), 2000u);
  EXPECT_NE(derive_key(1, "walk", 0), derive_key(2, "walk", 0));
}

TEST(Rng, SplitLeavesParentUntouched) {
  Stream a(9);
  Stream b(9);
  auto child = a.split("x", 3);
  child();
  EXPECT_EQ(a(), b());
  EXPECT_EQ(child.key(), derive_key(9, "x", 3));
}

TEST(Rng, ZigzagIsInjectiveNearZero) {
  std::set<std::uint64_t> seen;
  for (std::int64_t x = -500; x <= 500; ++x) seen.insert(zigzag(x));
  EXPECT_EQ(seen.size(), 1001u);
}

TEST(Rng, UniformMoments) {
  Stream s(123);
  const int n = 1'000'000;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(s);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    m1 += u;
    m2 += u * u;
  }
  m1 /= n;
  m2 /= n;
  EXPECT_NEAR(m1, 0.5, 4 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(m2 - m1 * m1, 1.0 / 12.0, 1e-3);
}

TEST(Rng, NormalMoments) {
  Stream s(5);
  const int n = 400'000;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(s);
    m1 += z;
    m2 += z * z;
  }
  m1 /= n;
  m2 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Rng, ExponentialMean) {
  Stream s(6);
  const int n = 400'000;
  double m = 0;
  for (int i = 0; i < n; ++i) m += standard_exponential(s);
  EXPECT_NEAR(m / n, 1.0, 4.0 / std::sqrt(n));
}

class PoissonMean : public ::testing::TestWithParam<double> {};

TEST_P(PoissonMean, MeanAndVarianceMatch) {
  const double lambda = GetParam();
  Stream s(static_cast<std::uint64_t>(lambda * 1000));
  const int n = 200'000;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double k = static_cast<double>(poisson(s, lambda));
    m1 += k;
    m2 += k * k;
  }
  m1 /= n;
  m2 /= n;
  EXPECT_NEAR(m1, lambda, 4.0 * std::sqrt(lambda / n));
  EXPECT_NEAR((m2 - m1 * m1) / lambda, 1.0, 0.02);
}

INSTANTIATE_TEST_SUITE_P(Means, PoissonMean, ::testing::Values(0.5, 3.0, 29.0, 31.0, 250.0));

TEST(Rng, PoissonZeroMean) {
  Stream s(1);
  EXPECT_EQ(poisson(s, 0.0), 0u);
}
