#ifndef RWCRE_LIMITLAWS_HPP
#define RWCRE_LIMITLAWS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "rwcre/environment.hpp"
#include "rwcre/errors.hpp"
#include "rwcre/estimators.hpp"
#include "rwcre/parallel.hpp"
#include "rwcre/rng.hpp"
#include "rwcre/walker.hpp"

namespace rwcre {

//---------------------------------------------------------------------------//
// Totally left-skewed stable law
//---------------------------------------------------------------------------//

/// Target characteristic function
///   E exp(iuW) = exp(-b|u|^s (1 + i sgn(u) tan(s pi / 2))).
///
/// In the (alpha, beta, sigma, mu) convention with
///   E exp(iuX) = exp(-sigma^alpha |u|^alpha (1 - i beta sgn(u) tan(pi alpha / 2)) + i mu u)
/// this is alpha = s, beta = -1, sigma = b^(1/s), mu = 0. For alpha > 1 the
/// mean is mu, so W is centred.
///
/// Chambers-Mallows-Stuck with V ~ U(-pi/2, pi/2), E ~ Exp(1):
///   B = atan(beta tan(pi alpha / 2)) / alpha
///   S = (1 + beta^2 tan^2(pi alpha / 2))^(1 / (2 alpha))
///   X = S sin(alpha (V + B)) / cos(V)^(1/alpha)
///         * (cos(V - alpha (V + B)) / E)^((1 - alpha) / alpha)
/// gives the unit-scale law; W = sigma X.
struct StableParams {
  double s = 1.5;
  double b = 1.0;

  StableParams() = default;
  StableParams(double s_, double b_) : s(s_), b(b_) {
    if (!(s > 1.0 && s < 2.0)) throw std::invalid_argument("stable index s must lie in (1,2)");
    if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("stable scale b must be positive");
  }

  std::complex<double> charfun(double u) const {
    if (u == 0.0) return {1.0, 0.0};
    const double au = std::pow(std::fabs(u), s);
    const double sgn = u > 0.0 ? 1.0 : -1.0;
    const std::complex<double> expo(-b * au, -b * au * sgn * std::tan(s * std::numbers::pi / 2.0));
    return std::exp(expo);
  }
};

template <class Rng>
double sample_stable(const StableParams& p, Rng& rng) {
  const double alpha = p.s;
  const double beta = -1.0;
  const double t = std::tan(std::numbers::pi * alpha / 2.0);
  const double B = std::atan(beta * t) / alpha;
  const double S = std::pow(1.0 + beta * beta * t * t, 1.0 / (2.0 * alpha));
  const double V = std::numbers::pi * (open_uniform01(rng) - 0.5);
  const double E = standard_exponential(rng);
  const double X = S * std::sin(alpha * (V + B)) / std::pow(std::cos(V), 1.0 / alpha) *
                   std::pow(std::cos(V - alpha * (V + B)) / E, (1.0 - alpha) / alpha);
  return std::pow(p.b, 1.0 / alpha) * X;
}

//---------------------------------------------------------------------------//
// One-sided Levy densities
//---------------------------------------------------------------------------//

namespace detail {

/// cos(x) - 1 and x - sin(x) without cancellation near 0.
inline double cos_minus_one(double x) {
  const double h = std::sin(0.5 * x);
  return -2.0 * h * h;
}

inline double x_minus_sin(double x) {
  if (std::fabs(x) > 0.1) return x - std::sin(x);
  const double x2 = x * x;
  return x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)));
}

/// Integral of f over [a, b], split at the interior `breaks`. Uses tanh-sinh,
/// which tolerates the integrable endpoint singularities met here.
inline double integrate_pieces(const std::function<double(double)>& f, double a, double b,
                               std::vector<double> breaks, double tol = 1e-10) {
  if (!(b > a)) return 0.0;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  boost::math::quadrature::tanh_sinh<double> ts(12);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = breaks[i], hi = breaks[i + 1];
    if (lo < a || hi > b || !(hi > lo)) continue;
    double err = 0.0;
    double l1 = 0.0;
    double v = 0.0;
    try {
      v = ts.integrate(f, lo, hi, tol, &err, &l1);
    } catch (const std::exception& e) {
      throw QuadratureFailure(std::string("quadrature failed: ") + e.what());
    }
    if (!std::isfinite(v) || err > 1e-6 * std::max(1.0, l1)) {
      throw QuadratureFailure("quadrature did not converge on [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
    }
    total += v;
  }
  return total;
}

}  // namespace detail

enum class LevyKind { zero, critical, profile };

/// Atom of the step measure g(dx).
struct StepAtom {
  double x = 0.0;
  double mass = 0.0;
};

/// Levy density on (-inf, 0) with bounded support [-radius, 0), written in
/// terms of t = -x > 0. Every supported density is dominated by
/// envelope * t^(-s-1), which the jump sampler uses for rejection.
class LevyDensity {
 public:
  static LevyDensity zero() { return LevyDensity(LevyKind::zero, 1.5); }

  /// lambda_{c,r}(x) = c |x|^(-s-1) (1 + x/r)_+.
  static LevyDensity critical(double c, double r, double s) {
    if (!(c >= 0.0) || !(r > 0.0) || !(s > 0.0 && s < 2.0)) {
      throw std::invalid_argument("critical Levy density needs c >= 0, r > 0, s in (0,2)");
    }
    LevyDensity d(LevyKind::critical, s);
    d.c_ = c;
    d.r_ = r;
    d.radius_ = r;
    d.envelope_ = c;
    if (c == 0.0) d.kind_ = LevyKind::zero;
    return d;
  }

  /// lambda_g(-t) = K0 t^(-s) sum over atoms with x >= t/nu of
  ///                mass (nu^s / t - (s-1)/x).
  static LevyDensity from_profile(std::vector<StepAtom> g, double K0, double nu, double s) {
    if (!(K0 > 0.0) || !(nu > 0.0) || !(s > 1.0 && s < 2.0)) {
      throw std::invalid_argument("profile Levy density needs K0 > 0, nu > 0, s in (1,2)");
    }
    double total = 0.0;
    double x_max = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(g[i].x > 0.0) || !(g[i].mass >= 0.0) || !std::isfinite(g[i].x)) {
        throw UnboundedSupport("g[" + std::to_string(i) + "]: atoms need finite x > 0 and mass >= 0");
      }
      total += g[i].mass;
      x_max = std::max(x_max, g[i].x);
    }
    std::sort(g.begin(), g.end(), [](const StepAtom& a, const StepAtom& b) { return a.x < b.x; });
    LevyDensity d(LevyKind::profile, s);
    d.K0_ = K0;
    d.nu_ = nu;
    d.atoms_ = std::move(g);
    d.radius_ = nu * x_max;
    d.envelope_ = K0 * std::pow(nu, s) * total;
    if (total == 0.0) {
      d.kind_ = LevyKind::zero;
      return d;
    }
    // The bracket is smallest just below each breakpoint t = nu x_i.
    for (const auto& a : d.atoms_) {
      const double t = nu * a.x * (1.0 - 1e-12);
      if (d.at(t) < -1e-12 * d.envelope_ * std::pow(t, -s - 1.0)) {
        throw std::invalid_argument("profile Levy density is negative near t = " + std::to_string(t) +
                                    " (needs nu^(s-1) >= s-1)");
      }
    }
    return d;
  }

  LevyKind kind() const noexcept { return kind_; }
  double s() const noexcept { return s_; }
  double radius() const noexcept { return radius_; }
  double envelope() const noexcept { return envelope_; }

  /// lambda(-t) for t > 0.
  double at(double t) const {
    if (!(t > 0.0) || t >= radius_) return 0.0;
    switch (kind_) {
      case LevyKind::zero: return 0.0;
      case LevyKind::critical: return c_ * std::pow(t, -s_ - 1.0) * (1.0 - t / r_);
      case LevyKind::profile: {
        double acc = 0.0;
        for (const auto& a : atoms_) {
          if (a.x >= t / nu_) acc += a.mass * (std::pow(nu_, s_) / t - (s_ - 1.0) / a.x);
        }
        return K0_ * std::pow(t, -s_) * acc;
      }
    }
    return 0.0;
  }

  double operator()(double x) const { return x < 0.0 ? at(-x) : 0.0; }

  /// Points where lambda is not smooth, in t.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    for (const auto& a : atoms_) out.push_back(nu_ * a.x);
    return out;
  }

  /// Integral of f(t) lambda(-t) dt over t in [lo, hi].
  double integrate(const std::function<double(double)>& f, double lo, double hi) const {
    if (kind_ == LevyKind::zero) return 0.0;
    hi = std::min(hi, radius_);
    // Very close to 0 the power law overflows before f(t) can damp it; the
    // integrands used here vanish there.
    return detail::integrate_pieces(
        [&](double t) {
          const double v = f(t) * at(t);
          return std::isfinite(v) ? v : 0.0;
        },
        lo, hi, breakpoints());
  }

  /// Integral of x^2 lambda(x) dx over the whole support.
  double second_moment() const {
    if (kind_ == LevyKind::critical) {
      return c_ * std::pow(r_, 2.0 - s_) * (1.0 / (2.0 - s_) - 1.0 / (3.0 - s_));
    }
    return integrate([](double t) { return t * t; }, 0.0, radius_);
  }

  /// exp(int (e^{iux} - 1 - iux) lambda(x) dx) by quadrature.
  std::complex<double> charfun(double u) const {
    if (kind_ == LevyKind::zero) return {1.0, 0.0};
    const double re = integrate([u](double t) { return detail::cos_minus_one(u * t); }, 0.0, radius_);
    const double im = integrate([u](double t) { return detail::x_minus_sin(u * t); }, 0.0, radius_);
    return std::exp(std::complex<double>(re, im));
  }

 private:
  LevyDensity(LevyKind k, double s) : kind_(k), s_(s) {}

  LevyKind kind_;
  double s_;
  double c_ = 0.0;
  double r_ = 0.0;
  double K0_ = 0.0;
  double nu_ = 0.0;
  std::vector<StepAtom> atoms_;
  double radius_ = 0.0;
  double envelope_ = 0.0;
};

/// Quantities the tempered stable sampler needs at truncation epsilon.
struct TruncatedLevy {
  double epsilon = 0.0;
  double intensity = 0.0;       ///< int_{t > eps} lambda
  double jump_mean = 0.0;       ///< int_{t > eps} x lambda (negative)
  double small_variance = 0.0;  ///< int_{t < eps} x^2 lambda
};

inline TruncatedLevy truncate(const LevyDensity& d, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  TruncatedLevy tl;
  tl.epsilon = epsilon;
  if (d.kind() == LevyKind::zero) return tl;
  const double lo = std::min(epsilon, d.radius());
  tl.intensity = d.integrate([](double) { return 1.0; }, lo, d.radius());
  tl.jump_mean = -d.integrate([](double t) { return t; }, lo, d.radius());
  tl.small_variance = d.integrate([](double t) { return t * t; }, 0.0, lo);
  return tl;
}

/// Characteristic function of the law the sampler actually draws from:
/// compensated big jumps plus a Gaussian for the small ones.
inline std::complex<double> truncated_charfun(const LevyDensity& d, const TruncatedLevy& tl, double u) {
  if (d.kind() == LevyKind::zero) return {1.0, 0.0};
  const double lo = std::min(tl.epsilon, d.radius());
  const double re = d.integrate([u](double t) { return detail::cos_minus_one(u * t); }, lo, d.radius());
  const double im = d.integrate([u](double t) { return detail::x_minus_sin(u * t); }, lo, d.radius());
  return std::exp(std::complex<double>(re - 0.5 * u * u * tl.small_variance, im));
}

/// Draw of |jump| from lambda restricted to t in [eps, radius): truncated
/// Pareto proposal t^(-s-1), accepted with lambda / envelope.
template <class Rng>
double sample_jump_size(const LevyDensity& d, double eps, Rng& rng) {
  const double s = d.s();
  const double a = std::pow(eps, -s);
  const double b = std::pow(d.radius(), -s);
  for (;;) {
    const double u = uniform01(rng);
    const double t = std::pow(a - u * (a - b), -1.0 / s);
    const double bound = d.envelope() * std::pow(t, -s - 1.0);
    if (uniform01(rng) * bound <= d.at(t)) return t;
  }
}

template <class Rng>
double sample_tempered_stable(const LevyDensity& d, const TruncatedLevy& tl, Rng& rng) {
  if (d.kind() == LevyKind::zero) return 0.0;
  const std::uint64_t jumps = poisson(rng, tl.intensity);
  double acc = 0.0;
  for (std::uint64_t j = 0; j < jumps; ++j) acc -= sample_jump_size(d, tl.epsilon, rng);
  acc -= tl.jump_mean;
  if (tl.small_variance > 0.0) acc += std::sqrt(tl.small_variance) * standard_normal(rng);
  return acc;
}

template <class Rng>
double sample_tempered_stable(const LevyDensity& d, double epsilon, Rng& rng) {
  return sample_tempered_stable(d, truncate(d, epsilon), rng);
}

//---------------------------------------------------------------------------//
// Sinai oracle
//---------------------------------------------------------------------------//

struct SinaiOracleOptions {
  Tick depth = Tick{1} << 20;
  std::uint64_t calibration = 2000;
  std::uint64_t seed = 0x51A1;
  unsigned workers = 0;
};

/// Variance-normalised annealed RWRE displacement at depth T. Mean and
/// variance come from a calibration batch drawn once at construction.
class SinaiOracle {
 public:
  SinaiOracle(const EnvironmentLaw& law, SinaiOracleOptions opt = {}) : law_(law), opt_(opt) {
    const RegimeInfo info = solve_s(law);
    if (info.regime != Regime::sinai) {
      throw RegimeMismatch("Sinai oracle needs a recurrent law (s = 0), got s = " +
                           std::to_string(info.s));
    }
    if (opt_.calibration < 2) throw BudgetTooSmall("calibration needs at least 2 draws");
    const auto draws = raw_batch(opt_.calibration, derive_key(opt_.seed, "calibration", 0));
    const SampleMoments m = sample_moments(draws);
    mean_ = m.mean;
    sd_ = std::sqrt(m.variance);
    if (!(sd_ > 0.0)) throw DegenerateLaw("oracle calibration produced zero variance");
  }

  Tick depth() const noexcept { return opt_.depth; }
  double mean() const noexcept { return mean_; }
  double sd() const noexcept { return sd_; }

  template <class Rng>
  double operator()(Rng& rng) const {
    EnvironmentRealization env(law_, rng());
    Stream walk_rng(rng());
    const auto z = walk(env, 0, opt_.depth, walk_rng);
    return (static_cast<double>(z) - mean_) / sd_;
  }

  /// `count` normalised draws, replica i seeded from (seed, i).
  std::vector<double> batch(std::uint64_t count, std::uint64_t seed) const {
    const auto raw = raw_batch(count, seed);
    std::vector<double> out;
    out.reserve(raw.size());
    for (auto z : raw) out.push_back((static_cast<double>(z) - mean_) / sd_);
    return out;
  }

 private:
  std::vector<std::int64_t> raw_batch(std::uint64_t count, std::uint64_t seed) const {
    return run_replicas<std::int64_t>(
        count, resolve_workers(opt_.workers), [&]() { return EnvironmentRealization(law_, 0); },
        [&](EnvironmentRealization& env, std::uint64_t i) {
          env.reset(0, derive_key(seed, "oracle-env", i));
          Stream rng(derive_key(seed, "oracle-walk", i));
          return walk(env, 0, opt_.depth, rng);
        });
  }

  EnvironmentLaw law_;
  SinaiOracleOptions opt_;
  double mean_ = 0.0;
  double sd_ = 1.0;
};

/// Resamples uniformly from a fixed set of draws.
class SamplePool {
 public:
  explicit SamplePool(std::vector<double> draws) : draws_(std::move(draws)) {
    if (draws_.empty()) throw std::invalid_argument("sample pool is empty");
  }

  template <class Rng>
  double operator()(Rng& rng) const {
    const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(draws_.size()));
    return draws_[std::min(i, draws_.size() - 1)];
  }

  std::size_t size() const noexcept { return draws_.size(); }
  const std::vector<double>& draws() const noexcept { return draws_; }

 private:
  std::vector<double> draws_;
};

//---------------------------------------------------------------------------//
// Mixtures with Gaussian completion
//---------------------------------------------------------------------------//

class MixtureSpec {
 public:
  static constexpr double kTailTolerance = 1e-8;

  /// `lambda` must be nonnegative and nonincreasing with norm at most 1.
  explicit MixtureSpec(std::vector<double> lambda) : lambda_(std::move(lambda)) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < lambda_.size(); ++i) {
      if (!(lambda_[i] >= 0.0) || !std::isfinite(lambda_[i])) {
        throw std::invalid_argument("lambda[" + std::to_string(i) + "] must be finite and >= 0");
      }
      if (i > 0 && lambda_[i] > lambda_[i - 1]) {
        throw std::invalid_argument("lambda[" + std::to_string(i) + "] breaks the nonincreasing order");
      }
      norm2 += lambda_[i] * lambda_[i];
    }
    if (norm2 > 1.0 + 1e-12) throw std::invalid_argument("lambda has l2 norm above 1");
    norm2_ = std::min(1.0, norm2);
    completion_ = std::sqrt(1.0 - norm2_);
    // Keep entries until the remaining l2 tail is below tolerance.
    double tail = norm2_;
    used_ = 0;
    while (used_ < lambda_.size() && std::sqrt(std::max(0.0, tail)) >= kTailTolerance) {
      tail -= lambda_[used_] * lambda_[used_];
      ++used_;
    }
  }

  /// Sorts a measured profile into nonincreasing order first.
  static MixtureSpec from_profile(std::vector<double> lambda) {
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    return MixtureSpec(std::move(lambda));
  }

  const std::vector<double>& lambda() const noexcept { return lambda_; }
  double norm_squared() const noexcept { return norm2_; }
  double completion() const noexcept { return completion_; }
  std::size_t terms() const noexcept { return used_; }

 private:
  std::vector<double> lambda_;
  double norm2_ = 0.0;
  double completion_ = 1.0;
  std::size_t used_ = 0;
};

template <class Base, class Rng>
double sample_mixture(const MixtureSpec& spec, const Base& base, Rng& rng) {
  double acc = 0.0;
  for (std::size_t j = 0; j < spec.terms(); ++j) {
    if (spec.lambda()[j] == 0.0) break;
    acc += spec.lambda()[j] * base(rng);
  }
  if (spec.completion() > 0.0) acc += spec.completion() * standard_normal(rng);
  return acc;
}

/// Unit-variance Gaussian base law.
struct GaussianBase {
  template <class Rng>
  double operator()(Rng& rng) const {
    return standard_normal(rng);
  }
};

/// Empirical characteristic function of a sample.
inline std::complex<double> empirical_charfun(const std::vector<double>& xs, double u) {
  double re = 0.0, im = 0.0;
  for (double x : xs) {
    re += std::cos(u * x);
    im += std::sin(u * x);
  }
  const double n = static_cast<double>(xs.size());
  return {re / n, im / n};
}

}  // namespace rwcre

#endif  // RWCRE_LIMITLAWS_HPP
