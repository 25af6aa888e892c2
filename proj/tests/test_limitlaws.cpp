#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "rwcre/estimators.hpp"
#include "rwcre/limitlaws.hpp"

using namespace rwcre;

namespace {

std::vector<double> draw(std::size_t n, std::uint64_t seed, const std::function<double(Stream&)>& f) {
  Stream rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) x = f(rng);
  return xs;
}

double mean_of(const std::vector<double>& xs) {
  double m = 0;
  for (double x : xs) m += x;
  return m / xs.size();
}

double var_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  return v / (xs.size() - 1);
}

std::vector<double> negated(std::vector<double> xs) {
  for (auto& x : xs) x = -x;
  return xs;
}

}  // namespace

TEST(Stable, RejectsBadParameters) {
  EXPECT_THROW(StableParams(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(StableParams(2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(StableParams(1.5, 0.0), std::invalid_argument);
  EXPECT_THROW(StableParams(1.5, INFINITY), std::invalid_argument);
}

TEST(Stable, EmpiricalCharacteristicFunction) {
  for (double s : {1.3, 1.7}) {
    const StableParams p(s, 0.8);
    const auto xs = draw(1000000, 11, [&](Stream& r) { return sample_stable(p, r); });
    for (double u : {-1.0, -0.5, 0.5, 1.0}) {
      const auto ecf = empirical_charfun(xs, u);
      const auto cf = p.charfun(u);
      EXPECT_NEAR(std::abs(ecf), std::abs(cf), 0.01) << s << " " << u;
      EXPECT_NEAR(std::arg(ecf), std::arg(cf), 0.01) << s << " " << u;
      // Independent restatement of the exponent.
      const double sg = u > 0 ? 1.0 : -1.0;
      const auto direct = std::exp(-0.8 * std::pow(std::fabs(u), s) *
                                   std::complex<double>(1.0, sg * std::tan(s * std::numbers::pi / 2)));
      EXPECT_NEAR(std::abs(direct - cf), 0.0, 1e-14);
    }
  }
}

TEST(Stable, MeanZeroAndLeftSkewed) {
  const StableParams p(1.5, 1.0);
  const std::size_t n = 1000000;
  const auto xs = draw(n, 12, [&](Stream& r) { return sample_stable(p, r); });
  // Infinite variance: bound the mean by a stable-scaled envelope.
  EXPECT_LT(std::fabs(mean_of(xs)), 20 * std::pow(double(n), 1 / p.s - 1));
  std::size_t left = 0, right = 0;
  for (double x : xs) {
    left += x < -10;
    right += x > 10;
  }
  EXPECT_GT(left, 100u);
  EXPECT_GT(left, 20 * (right + 1));
}

TEST(LevyDensity, CriticalShapeAndMoments) {
  const auto d = LevyDensity::critical(2.0, 1.5, 1.4);
  EXPECT_EQ(d.at(2.0), 0.0);
  EXPECT_EQ(d(0.5), 0.0);
  EXPECT_NEAR(d(-0.3), 2.0 * std::pow(0.3, -2.4) * (1 - 0.3 / 1.5), 1e-12);
  EXPECT_NEAR(d.second_moment(), d.integrate([](double t) { return t * t; }, 0.0, 1.5), 1e-8);
  EXPECT_EQ(LevyDensity::critical(0.0, 1.0, 1.5).kind(), LevyKind::zero);
  EXPECT_THROW(LevyDensity::critical(1.0, 0.0, 1.5), std::invalid_argument);
}

TEST(LevyDensity, ProfileShape) {
  const std::vector<StepAtom> g{{1.0, 0.5}, {2.0, 0.5}};
  const double K0 = 1.3, nu = 0.8, s = 1.5;
  const auto d = LevyDensity::from_profile(g, K0, nu, s);
  auto oracle = [&](double t) {
    double acc = 0;
    for (const auto& a : g) {
      if (a.x >= t / nu) acc += a.mass * (std::pow(nu, s) / t - (s - 1) / a.x);
    }
    return K0 * std::pow(t, -s) * acc;
  };
  for (double t : {0.05, 0.5, 0.79, 0.81, 1.2, 1.59}) EXPECT_NEAR(d.at(t), oracle(t), 1e-12) << t;
  EXPECT_EQ(d.at(1.61), 0.0);
  for (double t = 0.01; t < 1.6; t += 0.01) EXPECT_GE(d.at(t), 0.0);
  EXPECT_GT(d.second_moment(), 0.0);
}

TEST(LevyDensity, ProfileNegativityRejected) {
  const std::vector<StepAtom> g{{1.0, 1.0}};
  EXPECT_THROW(LevyDensity::from_profile(g, 1.0, 0.2, 1.5), std::invalid_argument);
  EXPECT_NO_THROW(LevyDensity::from_profile(g, 1.0, 0.3, 1.5));
  EXPECT_THROW(LevyDensity::from_profile({{-1.0, 1.0}}, 1.0, 1.0, 1.5), UnboundedSupport);
}

TEST(TemperedStable, ZeroDensityGivesZero) {
  Stream rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_tempered_stable(LevyDensity::zero(), 0.1, rng), 0.0);
}

TEST(TemperedStable, TruncationQuantities) {
  const auto d = LevyDensity::critical(1.0, 1.0, 1.5);
  const auto tl = truncate(d, 0.1);
  // Closed forms for c t^{-s-1}(1 - t/r) on [eps, r].
  const double s = 1.5, e = 0.1;
  const double intensity = (std::pow(e, -s) - 1) / s - (std::pow(e, 1 - s) - 1) / (s - 1);
  EXPECT_NEAR(tl.intensity, intensity, 1e-8);
  const double small = std::pow(e, 2 - s) / (2 - s) - std::pow(e, 3 - s) / (3 - s);
  EXPECT_NEAR(tl.small_variance, small, 1e-9);
  EXPECT_THROW(truncate(d, 0.0), std::invalid_argument);
}

TEST(TemperedStable, CriticalVarianceAndCharacteristicFunction) {
  const auto d = LevyDensity::critical(1.0, 1.0, 1.5);
  const auto tl = truncate(d, 0.1);
  const auto xs = draw(1000000, 13, [&](Stream& r) { return sample_tempered_stable(d, tl, r); });
  EXPECT_NEAR(var_of(xs) / d.second_moment(), 1.0, 0.02);
  EXPECT_NEAR(mean_of(xs), 0.0, 4 * std::sqrt(d.second_moment() / xs.size()));
  for (double u : {-1.0, -0.5, 0.5, 1.0}) {
    EXPECT_LT(std::abs(empirical_charfun(xs, u) - d.charfun(u)), 0.02) << u;
  }
}

TEST(TemperedStable, ProfileCharacteristicFunction) {
  const auto d = LevyDensity::from_profile({{1.0, 0.5}, {2.0, 0.5}}, 1.0, 1.0, 1.5);
  const auto tl = truncate(d, 0.1);
  const auto xs = draw(200000, 14, [&](Stream& r) { return sample_tempered_stable(d, tl, r); });
  EXPECT_NEAR(var_of(xs) / d.second_moment(), 1.0, 0.03);
  for (double u : {-1.0, -0.5, 0.5, 1.0}) {
    EXPECT_LT(std::abs(empirical_charfun(xs, u) - d.charfun(u)), 0.02) << u;
  }
}

TEST(TemperedStable, InsensitiveToEpsilon) {
  const auto d = LevyDensity::critical(1.0, 1.0, 1.5);
  const double eps = 0.02;
  const auto a = truncated_charfun(d, truncate(d, eps), 1.0);
  const auto b = truncated_charfun(d, truncate(d, eps / 2), 1.0);
  EXPECT_LT(std::abs(a - b), 1e-3);
  EXPECT_LT(std::abs(b - d.charfun(1.0)), 1e-3);
}

TEST(SinaiOracle, RejectsTransientLaw) {
  EXPECT_THROW(SinaiOracle(make_two_point_law(0.4, 0.8, 0.5)), RegimeMismatch);
}

class SinaiOracleFixture : public ::testing::Test {
 protected:
  static inline const EnvironmentLaw law = make_two_point_law(0.25, 0.75, 0.5);
};

TEST_F(SinaiOracleFixture, NormalisedAndSymmetric) {
  SinaiOracle oracle(law, {.depth = 4096, .calibration = 4000, .seed = 3});
  const auto xs = oracle.batch(4000, 99);
  EXPECT_NEAR(mean_of(xs), 0.0, 4 * std::sqrt(1.0 / xs.size()));
  EXPECT_NEAR(var_of(xs), 1.0, 0.1);
  EXPECT_LT(ks_two_sample(xs, negated(xs)), 0.05);
  Stream rng(5);
  EXPECT_TRUE(std::isfinite(oracle(rng)));
}

TEST_F(SinaiOracleFixture, StableUnderDepthDoubling) {
  SinaiOracle shallow(law, {.depth = 8192, .calibration = 3000, .seed = 4});
  SinaiOracle deep(law, {.depth = 16384, .calibration = 3000, .seed = 5});
  const auto a = shallow.batch(5000, 6);
  const auto b = deep.batch(5000, 7);
  EXPECT_LT(ks_two_sample(a, b), 0.05);
}

TEST(Mixture, WeightIdentity) {
  for (const auto& lam : std::vector<std::vector<double>>{{}, {1.0}, {0.6, 0.5, 0.3}, {0.1, 0.1}}) {
    MixtureSpec spec(lam);
    double n2 = 0;
    for (double l : lam) n2 += l * l;
    EXPECT_NEAR(spec.completion() * spec.completion() + spec.norm_squared(), 1.0, 1e-15);
    EXPECT_NEAR(spec.norm_squared(), n2, 1e-15);
  }
  EXPECT_EQ(MixtureSpec({1.0}).completion(), 0.0);
  EXPECT_EQ(MixtureSpec({}).completion(), 1.0);
}

TEST(Mixture, Validation) {
  EXPECT_THROW(MixtureSpec({0.3, 0.5}), std::invalid_argument);
  EXPECT_THROW(MixtureSpec({0.8, 0.7}), std::invalid_argument);
  EXPECT_THROW(MixtureSpec({-0.1}), std::invalid_argument);
  const auto spec = MixtureSpec::from_profile({0.3, 0.5});
  EXPECT_EQ(spec.lambda().front(), 0.5);
}

TEST(Mixture, TruncatesGeometricTail) {
  std::vector<double> lam;
  for (int j = 1; j <= 60; ++j) lam.push_back(std::pow(0.5, j));
  MixtureSpec spec(lam);
  EXPECT_LT(spec.terms(), lam.size());
  double tail = 0;
  for (std::size_t j = spec.terms(); j < lam.size(); ++j) tail += lam[j] * lam[j];
  EXPECT_LT(std::sqrt(tail), MixtureSpec::kTailTolerance);
}

TEST(Mixture, PointMassOnFirstEntryReproducesBase) {
  const SamplePool pool({-2.0, 0.5, 3.0});
  MixtureSpec spec({1.0});
  Stream rng(8);
  for (int i = 0; i < 50; ++i) {
    const double x = sample_mixture(spec, pool, rng);
    EXPECT_TRUE(x == -2.0 || x == 0.5 || x == 3.0);
  }
}

TEST(Mixture, GaussianBaseStaysStandardNormal) {
  for (const auto& lam : std::vector<std::vector<double>>{{}, {0.6, 0.5, 0.3}, {0.9}}) {
    MixtureSpec spec(lam);
    const auto xs = draw(100000, 15, [&](Stream& r) { return sample_mixture(spec, GaussianBase{}, r); });
    EXPECT_LT(ks_one_sample(xs, standard_normal_cdf), 0.01);
    EXPECT_NEAR(var_of(xs), 1.0, 3 * std::sqrt(2.0 / xs.size()));
  }
}
