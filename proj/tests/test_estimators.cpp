#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rwcre/estimators.hpp"

using namespace rwcre;

namespace {

double homogeneous_scgf(double p, double th) {
  return std::log(p * std::exp(th) + (1 - p) * std::exp(-th));
}

double bernoulli_rate(double p, double x) {
  auto term = [](double a, double b) { return a == 0.0 ? 0.0 : a * std::log(a / b); };
  return term((1 + x) / 2, p) + term((1 - x) / 2, 1 - p);
}

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> g;
  const int n = static_cast<int>(std::lround((hi - lo) / step));
  for (int i = 0; i <= n; ++i) g.push_back(lo + step * i);
  return g;
}

const EnvironmentLaw kBallistic = make_two_point_law(0.4, 0.8, 0.5);
const EnvironmentLaw kSinai = make_two_point_law(0.25, 0.75, 0.5);

}  // namespace

TEST(Histogram, ExactMoments) {
  Histogram h(3);
  for (int y : {-3, -1, -1, 1, 3, 3}) h.add(y);
  EXPECT_EQ(h.total(), 6u);
  EXPECT_DOUBLE_EQ(h.mean(), 1.0 / 3.0);
  const double m = 1.0 / 3.0;
  double ss = 0;
  for (int y : {-3, -1, -1, 1, 3, 3}) ss += (y - m) * (y - m);
  EXPECT_NEAR(h.variance(), ss / 5, 1e-12);
  Histogram g(3);
  g.add(1);
  h.merge(g);
  EXPECT_EQ(h.total(), 7u);
}

TEST(SampleMoments, MatchesTwoPassFormulas) {
  std::vector<std::int64_t> xs{4, -2, 7, 7, 0, -9, 3};
  const auto m = sample_moments(xs);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0;
  for (auto x : xs) ss += (x - mean) * (x - mean);
  EXPECT_DOUBLE_EQ(m.mean, mean);
  EXPECT_NEAR(m.variance, ss / (xs.size() - 1), 1e-12);
  EXPECT_NEAR(m.mean_se, std::sqrt(ss / (xs.size() - 1) / xs.size()), 1e-12);
}

TEST(McMoments, RejectsTinyBudget) {
  EXPECT_THROW(mc_moments(kBallistic, ResamplingMap::identity(), 10, 1, 1), BudgetTooSmall);
}

TEST(McMoments, SymmetricLawHasZeroMean) {
  for (const auto& map : {ResamplingMap::identity(), ResamplingMap::polynomial(1, 1),
                          ResamplingMap::frozen()}) {
    const auto rep = mc_moments(kSinai, map, 500, 4000, 17);
    EXPECT_LT(std::fabs(rep.mean), 4 * rep.mean_se) << map.name();
  }
}

TEST(McMoments, IdentityMapVarianceIsHomogeneous) {
  const Tick n = 10000;
  const auto rep = mc_moments(kBallistic, ResamplingMap::identity(), n, 2000, 3);
  const double pbar = kBallistic.mean_omega();
  const double target = 1 - (2 * pbar - 1) * (2 * pbar - 1);
  EXPECT_NEAR(rep.variance / n, target, 4 * rep.variance_se / n);
  EXPECT_NEAR(rep.mean / n, 2 * pbar - 1, 4 * rep.mean_se / n);
}

TEST(McMoments, FrozenSingleStep) {
  const auto rep = mc_moments(kBallistic, ResamplingMap::frozen(), 1, 100000, 5);
  const double v = 2 * kBallistic.mean_omega() - 1;
  EXPECT_NEAR(rep.variance, 1 - v * v, 4 * rep.variance_se);
  EXPECT_GE(rep.variance, 0.0);
}

TEST(McMoments, StandardErrorsScaleWithBudget) {
  const auto a = mc_moments(kBallistic, ResamplingMap::polynomial(1, 1), 400, 1000, 8);
  const auto b = mc_moments(kBallistic, ResamplingMap::polynomial(1, 1), 400, 16000, 9);
  EXPECT_NEAR(a.mean_se / b.mean_se, 4.0, 0.4);
  EXPECT_NEAR(a.variance_se / b.variance_se, 4.0, 0.6);
}

TEST(McMoments, BlockVariancesSumToTotal) {
  const auto rep = mc_moments(kBallistic, ResamplingMap::polynomial(2, 1), 300, 20000, 10);
  double sum = rep.boundary_variance;
  for (double v : rep.block_variances) sum += v;
  // Blocks are independent under the annealed law.
  EXPECT_NEAR(sum / rep.variance, 1.0, 0.05);
}

TEST(RunBatch, IndependentOfWorkerCount) {
  const auto map = ResamplingMap::polynomial(1, 1.5);
  const auto one = run_batch(kBallistic, map, 700, 300, 77, {.workers = 1, .checkpoints = {10, 400}});
  const auto three = run_batch(kBallistic, map, 700, 300, 77, {.workers = 3, .checkpoints = {10, 400}});
  EXPECT_EQ(one.positions, three.positions);
  EXPECT_EQ(one.checkpoint_positions, three.checkpoint_positions);
  ASSERT_EQ(one.blocks.size(), three.blocks.size());
  for (std::size_t k = 0; k < one.blocks.size(); ++k) EXPECT_EQ(one.blocks[k].counts, three.blocks[k].counts);
  EXPECT_EQ(one.boundary.counts, three.boundary.counts);
}

TEST(RunBatch, RejectsUnsortedCheckpoints) {
  EXPECT_THROW(run_batch(kBallistic, ResamplingMap::identity(), 10, 2, 1, {.checkpoints = {5, 2}}),
               std::invalid_argument);
  EXPECT_THROW(run_batch(kBallistic, ResamplingMap::identity(), 10, 2, 1, {.checkpoints = {11}}),
               std::invalid_argument);
}

TEST(VarianceProfile, UnitNormAndSortedPermutation) {
  const auto p = variance_profile(kBallistic, ResamplingMap::polynomial(1, 1), 1000, 500, 2);
  EXPECT_NEAR(p.norm_squared(), 1.0, 1e-12);
  EXPECT_TRUE(std::is_sorted(p.sorted.begin(), p.sorted.end(), std::greater<>()));
  auto a = p.lambda;
  auto b = p.sorted;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(VarianceProfile, FrozenPutsAllMassOnBoundary) {
  const auto p = variance_profile(kBallistic, ResamplingMap::frozen(), 200, 500, 2);
  ASSERT_EQ(p.lambda.size(), 1u);
  EXPECT_DOUBLE_EQ(p.boundary(), 1.0);
}

TEST(VarianceProfile, IdentityIsFlat) {
  const Tick n = 100;
  const auto p = variance_profile(kBallistic, ResamplingMap::identity(), n, 20000, 4);
  ASSERT_EQ(p.lambda.size(), n + 1);
  EXPECT_DOUBLE_EQ(p.boundary(), 0.0);
  for (Tick k = 0; k < n; ++k) EXPECT_NEAR(p.lambda[k], 1 / std::sqrt(double(n)), 0.004);
}

TEST(VarianceProfile, SinaiExponentialMapConcentratesOnLastBlocks) {
  const auto map = ResamplingMap::exponential(1, std::log(2.0));
  const Tick n = map.tau(12);
  const auto p = variance_profile(kSinai, map, n, 2000, 6);
  EXPECT_GT(p.sorted.front(), 0.4);
  double tail = 0;
  const auto& lam = p.lambda;
  const std::size_t blocks = lam.size() - 1;  // last entry is the boundary
  for (std::size_t k = blocks - 3; k < blocks; ++k) tail += lam[k] * lam[k];
  EXPECT_GT(tail, 0.6);
}

TEST(Scgf, ZeroAtOrigin) {
  const std::vector<double> th{-1, 0, 1};
  for (auto method : {ScgfMethod::path, ScgfMethod::blockwise}) {
    const auto t = scgf_estimate(kBallistic, ResamplingMap::polynomial(1, 1), 200, th, 100, 1,
                                 {.method = method});
    EXPECT_EQ(t.value[1], 0.0);
  }
  EXPECT_EQ(scgf_exact(kBallistic, ResamplingMap::polynomial(1, 1), 200, th).value[1], 0.0);
}

TEST(Scgf, RejectsThetaOutsideRange) {
  const std::vector<double> th{3.5};
  EXPECT_THROW(scgf_exact(kBallistic, ResamplingMap::identity(), 10, th), std::invalid_argument);
  EXPECT_THROW(scgf_estimate(kBallistic, ResamplingMap::identity(), 10, th, 1, 1), BudgetTooSmall);
}

TEST(Scgf, IdentityMapMatchesHomogeneousCumulant) {
  const auto th = grid(-2, 2, 0.25);
  const auto t = scgf_estimate(kBallistic, ResamplingMap::identity(), 10000, th, 1000, 21);
  const double pbar = kBallistic.mean_omega();
  for (std::size_t i = 0; i < th.size(); ++i) {
    EXPECT_NEAR(t.value[i], homogeneous_scgf(pbar, th[i]), 0.01) << th[i];
  }
}

TEST(Scgf, BlockwiseAgreesWithExactBlockProduct) {
  const auto map = ResamplingMap::polynomial(1, 1);
  const Tick n = 2000;
  // Blocks reach length 62 here; larger |theta| outruns a 4000-replica budget.
  const auto th = grid(-0.5, 0.5, 0.25);
  const auto mc = scgf_estimate(kBallistic, map, n, th, 4000, 31);
  const auto ex = scgf_exact(kBallistic, map, n, th);
  for (std::size_t i = 0; i < th.size(); ++i) {
    EXPECT_NEAR(mc.value[i], ex.value[i], 5 * std::hypot(mc.std_error[i], ex.std_error[i]) + 2e-3)
        << th[i];
  }
  EXPECT_LT(convexity_defect(ex.theta, ex.value), 1e-12);
  EXPECT_LT(convexity_defect(mc.theta, mc.value), 3 * *std::max_element(mc.std_error.begin(), mc.std_error.end()));
}

TEST(Scgf, PathEstimatorCollapsesAtLargeTheta) {
  const std::vector<double> th{3.0};
  EXPECT_THROW(scgf_estimate(kBallistic, ResamplingMap::identity(), 2000, th, 200, 5,
                             {.method = ScgfMethod::path}),
               EffectiveSampleCollapse);
}

TEST(Scgf, FrozenDiffersFromIdentityForSubBallisticLaw) {
  const auto law = two_point_law_with_s(0.3, 0.9, 0.5);
  ASSERT_LT(law.log_rho_mean(), 0.0);
  const auto th = grid(0.1, 0.5, 0.1);
  const auto fr = scgf_estimate(law, ResamplingMap::frozen(), 1000, th, 5000, 12);
  const auto id = scgf_estimate(law, ResamplingMap::identity(), 1000, th, 5000, 13);
  bool separated = false;
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (std::fabs(fr.value[i] - id.value[i]) > 4 * std::hypot(fr.std_error[i], id.std_error[i])) {
      separated = true;
    }
  }
  EXPECT_TRUE(separated);
}

TEST(Scgf, SlopeAtZeroIsSpeed) {
  const auto th = grid(-0.01, 0.01, 0.01);
  const auto t = scgf_exact(kBallistic, ResamplingMap::identity(), 100, th);
  EXPECT_NEAR(scgf_slope_at_zero(t), 2 * kBallistic.mean_omega() - 1, 1e-4);
}

TEST(Legendre, QuadraticIsSelfDual) {
  const auto th = grid(-3, 3, 0.01);
  std::vector<double> lam;
  for (double t : th) lam.push_back(t * t / 2);
  const auto x = grid(-1, 1, 0.05);
  const auto r = legendre_transform(th, lam, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(r.value[i], x[i] * x[i] / 2, 1e-9);
    EXPECT_NEAR(r.theta_star[i], x[i], 1e-6);
  }
}

TEST(Legendre, HomogeneousRelativeEntropy) {
  const double p = 0.6;
  ScgfTable t;
  t.theta = grid(-3, 3, 0.05);
  for (double th : t.theta) t.value.push_back(homogeneous_scgf(p, th));
  const auto x = grid(-0.9, 0.9, 0.1);
  const auto r = legendre_transform(t, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(r.value[i], bernoulli_rate(p, x[i]), 0.02) << x[i];
    EXPECT_GE(r.value[i], 0.0);
  }
  EXPECT_LT(convexity_defect(r.x, r.value), 1e-9);
}

TEST(Legendre, VanishesAtTheSpeed) {
  const auto th = grid(-2, 2, 0.01);
  const auto t = scgf_exact(kBallistic, ResamplingMap::polynomial(1, 1), 500, th);
  const double v = scgf_slope_at_zero(t);
  const std::vector<double> x{v, v - 0.2, v + 0.2};
  const auto r = legendre_transform(t, x);
  EXPECT_NEAR(r.value[0], 0.0, 1e-6);
  EXPECT_GT(r.value[1], 1e-3);
  EXPECT_GT(r.value[2], 1e-3);
}

TEST(Legendre, DoubleTransformRecoversTable) {
  const double p = 0.7;
  const auto th = grid(-2, 2, 0.01);
  std::vector<double> lam;
  for (double t : th) lam.push_back(homogeneous_scgf(p, t));
  const auto x = grid(-1, 1, 0.002);
  const auto rate = legendre_transform(th, lam, x);
  const auto back_at = grid(-1, 1, 0.1);
  const auto back = legendre_transform(rate.x, rate.value, back_at);
  for (std::size_t i = 0; i < back_at.size(); ++i) {
    EXPECT_NEAR(back.value[i], homogeneous_scgf(p, back_at[i]), 1e-4) << back_at[i];
  }
}

TEST(Legendre, RejectsBadTables) {
  const std::vector<double> th{0, 1};
  const std::vector<double> bad{0, NAN};
  const std::vector<double> x{0};
  EXPECT_THROW(legendre_transform(th, bad, x), std::invalid_argument);
  EXPECT_THROW(legendre_transform(th, std::vector<double>{0}, x), std::invalid_argument);
}

TEST(Homogenization, SingleStepBlocks) {
  const auto s = homogenization_summary(kBallistic, {{1, 1.0}});
  const double v = 2 * kBallistic.mean_omega() - 1;
  EXPECT_DOUBLE_EQ(s.mean_length, 1.0);
  EXPECT_NEAR(s.speed, v, 1e-15);
  EXPECT_NEAR(s.variance, 1 - v * v, 1e-14);
  EXPECT_TRUE(s.exact);
}

TEST(Homogenization, SingleLengthAtom) {
  const Tick T = 5;
  const auto s = homogenization_summary(kBallistic, {{T, 1.0}});
  AnnealedBlockLaw bl(kBallistic, T);
  EXPECT_NEAR(s.speed, bl.mean() / T, 1e-15);
  EXPECT_NEAR(s.variance, bl.variance() / T, 1e-15);
}

TEST(Homogenization, DerivativeIdentities) {
  const auto s = homogenization_summary(kBallistic, {{1, 0.2}, {3, 0.5}, {6, 0.3}});
  const double h = 1e-3;
  auto I = [&](double a) { return s.J_at(a) / s.mean_length; };
  const double d1 = (I(h) - I(-h)) / (2 * h);
  const double d2 = (I(h) - 2 * I(0) + I(-h)) / (h * h);
  EXPECT_NEAR(d1, s.speed, 1e-6);
  EXPECT_NEAR(d2, s.variance, 1e-6);
  EXPECT_NEAR(I(0), 0.0, 1e-15);
}

TEST(Homogenization, GridTablesAndErrors) {
  const std::vector<double> a{-1, 0, 1};
  const auto s = homogenization_summary(kBallistic, {{2, 1.0}}, a);
  ASSERT_EQ(s.J.size(), 3u);
  EXPECT_NEAR(s.I[2], s.J[2] / 2, 1e-15);
  EXPECT_THROW(homogenization_summary(kBallistic, {}), UnboundedSupport);
  EXPECT_THROW(homogenization_summary(kBallistic, {{kInfinite, 1.0}}), UnboundedSupport);
  EXPECT_THROW(homogenization_summary(kBallistic, {{1, 0.5}}), std::invalid_argument);
}

TEST(Recurrence, SymmetricLawStaysCentred) {
  const auto pts = recurrence_diagnostic(kSinai, ResamplingMap::polynomial(1, 1), {100, 1000, 5000}, 1000, 3);
  ASSERT_EQ(pts.size(), 3u);
  for (const auto& p : pts) {
    EXPECT_LT(std::fabs(p.mean), 4 * p.mean_se) << p.n;
    EXPECT_LT(p.ratio, 4 / std::sqrt(1000.0));
  }
}

TEST(Recurrence, RightTransientRatioGrows) {
  const auto pts = recurrence_diagnostic(kBallistic, ResamplingMap::polynomial(1, 1),
                                         {100000, 1000, 10000}, 200, 4);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].n, 1000u);
  EXPECT_LT(pts[0].ratio + 2 * pts[0].ratio_se, pts[1].ratio);
  EXPECT_LT(pts[1].ratio + 2 * pts[1].ratio_se, pts[2].ratio);
}

TEST(Recurrence, FrozenSinaiStaysNearZero) {
  const auto pts = recurrence_diagnostic(kSinai, ResamplingMap::frozen(), {1000, 10000}, 1000, 5);
  for (const auto& p : pts) EXPECT_LT(p.ratio, 0.2) << p.n;
  EXPECT_THROW(recurrence_diagnostic(kSinai, ResamplingMap::frozen(), {0}, 10, 1), std::invalid_argument);
}

TEST(GradualSums, ConstantValue) {
  const std::vector<Wide> masses{3, 1, 4, 1, 5, 9, 2, 6};
  for (Wide t : {Wide{1}, Wide{7}, Wide{31}}) {
    EXPECT_NEAR(static_cast<double>(gradual_sum_expected(masses, [](std::uint64_t, Wide) { return 0.25L; }, t)),
                0.25, 1e-15);
  }
  EXPECT_THROW(gradual_sum_expected(masses, [](std::uint64_t, Wide) { return 0.0L; }, 0),
               std::invalid_argument);
}

TEST(GradualSums, AlternatingDoublyExponentialMasses) {
  std::vector<Wide> masses;
  for (int k = 1; k <= 6; ++k) masses.push_back(Wide{1} << (1u << k));
  auto v = [](std::uint64_t k, Wide) -> std::int64_t { return k % 2 ? -1 : 1; };
  Wide tau = 0;
  Int128 signed_sum = 0;
  for (int K = 1; K <= 6; ++K) {
    tau += masses[K - 1];
    signed_sum += (K % 2 ? -1 : 1) * static_cast<Int128>(masses[K - 1]);
    const auto r = gradual_sum_expected_exact(masses, v, tau);
    EXPECT_EQ(r.num, signed_sum) << K;
    EXPECT_EQ(r.den, tau);
    if (K >= 3) {
      EXPECT_GT(std::fabs(static_cast<double>(r.value())), 0.8) << K;
    }
    EXPECT_EQ(r.value() < 0, K % 2 == 1);
  }
  const auto last = gradual_sum_expected_exact(masses, v, tau);
  EXPECT_NEAR(static_cast<double>(last.value()), 1.0, 1e-9);
}

TEST(GradualSums, ConvergentValuesAverageOut) {
  std::vector<Wide> masses;
  for (Wide k = 1; k <= 2000; ++k) masses.push_back(k);
  auto v = [](std::uint64_t, Wide m) { return 1.0L + 1.0L / static_cast<long double>(m); };
  double prev = 1e9;
  for (Wide t : {Wide{100}, Wide{10000}, Wide{1000000}}) {
    const double e = static_cast<double>(gradual_sum_expected(masses, v, t)) - 1.0;
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(Distances, IdenticalSamples) {
  std::vector<double> a{0.3, -1.2, 4.0, 2.2};
  EXPECT_EQ(ks_two_sample(a, a), 0.0);
  EXPECT_EQ(wasserstein1(a, a), 0.0);
}

TEST(Distances, KnownSmallCases) {
  EXPECT_DOUBLE_EQ(ks_two_sample({0.0, 1.0}, {2.0, 3.0}), 1.0);
  EXPECT_DOUBLE_EQ(wasserstein1({0.0, 1.0}, {2.0, 3.0}), 2.0);
  EXPECT_DOUBLE_EQ(ks_one_sample({0.5}, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.5);
}

TEST(Distances, NormalDraws) {
  Stream rng(99);
  std::vector<double> a(100000), b(100000);
  for (auto& x : a) x = standard_normal(rng);
  for (auto& x : b) x = standard_normal(rng) + 1.0;
  EXPECT_LT(distribution_distance(a, standard_normal_cdf), 0.01);
  EXPECT_NEAR(distribution_distance(a, b, DistanceKind::wasserstein1), 1.0, 0.02);
  EXPECT_GT(distribution_distance(a, b, DistanceKind::ks), 0.3);
}

TEST(Distances, Standardize) {
  std::vector<std::int64_t> xs{1, 3, 5, 7};
  const auto z = standardize(xs);
  EXPECT_NEAR(std::accumulate(z.begin(), z.end(), 0.0), 0.0, 1e-12);
  double ss = 0;
  for (double v : z) ss += v * v;
  EXPECT_NEAR(ss / 3, 1.0, 1e-12);
}

TEST(ShiftInequality, PointMassesMatchBinomial) {
  const auto rows = homogeneous_point_masses(0.7, 6);
  EXPECT_NEAR(rows[6][6 + 2], 15 * std::pow(0.7, 4) * std::pow(0.3, 2), 1e-15);
  EXPECT_EQ(rows[6][6 + 1], 0.0);
}

TEST(ShiftInequality, ChapmanKolmogorovLowerBoundHolds) {
  for (double p : {0.5, 0.7, 0.95}) {
    const double c = std::min(p, 1 - p);
    const auto chk = shift_inequality_check(p, c, 20);
    EXPECT_GT(chk.pairs, 1000u);
    EXPECT_GE(chk.lower_slack, -1e-9) << p;
  }
}

// The reverse comparison log P(X_{n-m} = x) - log P(X_n = x') >= m log c is
// not a consequence of ellipticity; the symmetric walk breaks it at n = 20.
TEST(ShiftInequality, ReverseComparisonFailsForSymmetricWalk) {
  const auto chk = shift_inequality_check(0.5, 0.5, 20);
  auto binom = [](int t, int x) {
    const int k = (t + x) / 2;
    return std::exp(std::lgamma(t + 1.0) - std::lgamma(k + 1.0) - std::lgamma(t - k + 1.0) - t * std::log(2.0));
  };
  const double oracle = std::log(binom(16, -16)) - std::log(binom(20, -12)) - 4 * std::log(0.5);
  EXPECT_NEAR(chk.upper_slack, oracle, 1e-9);
  EXPECT_LT(chk.upper_slack, -2.9);
  EXPECT_EQ(chk.worst_n, 20u);
  EXPECT_EQ(std::llabs(chk.worst_x - chk.worst_x_prime), 4);
  // Strongly biased walks satisfy it on this range.
  EXPECT_GT(shift_inequality_check(0.95, 0.05, 20).upper_slack, 0.0);
}
