#ifndef RWCRE_ENVIRONMENT_HPP
#define RWCRE_ENVIRONMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rwcre/errors.hpp"
#include "rwcre/rng.hpp"

namespace rwcre {

/// One support point of a finite environment law: a right-jump probability
/// and its weight.
struct Atom {
  double omega = 0.5;
  double weight = 0.0;
};

enum class LawKind { finite_support, clipped_continuous };

/// Law alpha of the right-jump probability at a single site.
///
/// Two kinds are supported. Finite-support laws carry an explicit atom list
/// and all expectations are exact sums. Clipped-continuous laws are a Beta
/// density restricted to [c, 1 - c]; expectations use composite Simpson on
/// 2048 panels and sampling is rejection from the uniform proposal.
///
/// Whether log rho is non-lattice is not decided here. For a two-point law
/// log rho is lattice exactly when the two values of log rho are rationally
/// related, which no floating-point test can settle; the caller may assert it
/// through `assert_non_lattice`.
class EnvironmentLaw {
 public:
  static constexpr int kQuadraturePanels = 2048;

  /// Finite law from atoms; weights must sum to 1 within 1e-12. Atoms with
  /// equal omega are merged.
  static EnvironmentLaw finite(std::vector<Atom> atoms) {
    if (atoms.empty()) throw DegenerateLaw("environment law has no atoms");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const Atom& a = atoms[i];
      if (!(a.omega > 0.0 && a.omega < 1.0)) {
        throw EllipticityViolation("atoms[" + std::to_string(i) +
                                   "]: omega must lie strictly inside (0,1)");
      }
      if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) {
        throw std::invalid_argument("atoms[" + std::to_string(i) +
                                    "]: weight must be nonnegative");
      }
      total += a.weight;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("atom weights sum to " + std::to_string(total) +
                                  ", expected 1");
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& x, const Atom& y) { return x.omega < y.omega; });
    std::vector<Atom> merged;
    for (const Atom& a : atoms) {
      if (a.weight == 0.0) continue;
      if (!merged.empty() && merged.back().omega == a.omega) {
        merged.back().weight += a.weight;
      } else {
        merged.push_back(a);
      }
    }
    if (merged.size() < 2) {
      throw DegenerateLaw("environment law must have at least two distinct atoms");
    }
    EnvironmentLaw law;
    law.kind_ = LawKind::finite_support;
    law.atoms_ = std::move(merged);
    law.ellipticity_ = std::min(law.atoms_.front().omega, 1.0 - law.atoms_.back().omega);
    double acc = 0.0;
    for (const Atom& a : law.atoms_) {
      acc += a.weight;
      law.cumulative_.push_back(acc);
    }
    law.cumulative_.back() = 1.0;
    return law;
  }

  /// Beta(alpha, beta) density restricted to [c, 1 - c].
  static EnvironmentLaw clipped_beta(double alpha, double beta, double c) {
    if (!(c > 0.0 && c < 0.5)) {
      throw EllipticityViolation("clipping constant must lie in (0, 1/2)");
    }
    if (!(alpha > 0.0 && beta > 0.0)) {
      throw std::invalid_argument("beta shape parameters must be positive");
    }
    EnvironmentLaw law;
    law.kind_ = LawKind::clipped_continuous;
    law.beta_a_ = alpha;
    law.beta_b_ = beta;
    law.ellipticity_ = c;
    // Bound of the unnormalised density on [c, 1-c] for the rejection step.
    double peak = std::max(law.beta_density(c), law.beta_density(1.0 - c));
    if (alpha > 1.0 && beta > 1.0) {
      const double mode = std::clamp((alpha - 1.0) / (alpha + beta - 2.0), c, 1.0 - c);
      peak = std::max(peak, law.beta_density(mode));
    }
    law.density_peak_ = peak;
    law.normaliser_ = law.integrate([](double) { return 1.0; }, false);
    return law;
  }

  LawKind kind() const noexcept { return kind_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double ellipticity() const noexcept { return ellipticity_; }
  bool non_degenerate() const noexcept { return true; }
  std::optional<bool> non_lattice() const noexcept { return non_lattice_; }
  void assert_non_lattice(bool flag) noexcept { non_lattice_ = flag; }
  double beta_alpha() const noexcept { return beta_a_; }
  double beta_beta() const noexcept { return beta_b_; }

  /// E[f(omega)].
  template <class F>
  double expect(F&& f) const {
    if (kind_ == LawKind::finite_support) {
      double sum = 0.0;
      for (const Atom& a : atoms_) sum += a.weight * f(a.omega);
      return sum;
    }
    return integrate(f, true);
  }

  double mean_omega() const {
    return expect([](double w) { return w; });
  }

  double log_rho_mean() const {
    return expect([](double w) { return std::log((1.0 - w) / w); });
  }

  /// Law of 1 - omega.
  EnvironmentLaw mirrored() const {
    EnvironmentLaw m = *this;
    if (kind_ == LawKind::finite_support) {
      std::vector<Atom> flipped;
      for (auto it = atoms_.rbegin(); it != atoms_.rend(); ++it) {
        flipped.push_back({1.0 - it->omega, it->weight});
      }
      m = finite(std::move(flipped));
    } else {
      m = clipped_beta(beta_b_, beta_a_, ellipticity_);
    }
    m.non_lattice_ = non_lattice_;
    return m;
  }

  /// One draw of omega.
  template <class Rng>
  double sample(Rng& rng) const {
    if (kind_ == LawKind::finite_support) return pick(uniform01(rng));
    const double lo = ellipticity_;
    const double width = 1.0 - 2.0 * ellipticity_;
    for (;;) {
      const double w = lo + width * uniform01(rng);
      if (uniform01(rng) * density_peak_ <= beta_density(w)) return w;
    }
  }

  /// Atom selected by a uniform variate (finite laws only).
  double pick(double u) const noexcept {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                 static_cast<std::ptrdiff_t>(atoms_.size()) - 1));
    return atoms_[idx].omega;
  }

 private:
  EnvironmentLaw() = default;

  double beta_density(double w) const noexcept {
    return std::pow(w, beta_a_ - 1.0) * std::pow(1.0 - w, beta_b_ - 1.0);
  }

  template <class F>
  double integrate(F&& f, bool normalise) const {
    const double lo = ellipticity_;
    const double hi = 1.0 - ellipticity_;
    const int panels = kQuadraturePanels;
    const double h = (hi - lo) / panels;
    double sum = 0.0;
    for (int i = 0; i <= panels; ++i) {
      const double w = lo + h * i;
      const double coef = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      sum += coef * beta_density(w) * f(w);
    }
    const double value = sum * h / 3.0;
    return normalise ? value / normaliser_ : value;
  }

  LawKind kind_ = LawKind::finite_support;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
  double ellipticity_ = 0.5;
  double beta_a_ = 1.0;
  double beta_b_ = 1.0;
  double density_peak_ = 1.0;
  double normaliser_ = 1.0;
  std::optional<bool> non_lattice_;
};

/// Two-point law {(p_low, weight_low), (p_high, 1 - weight_low)}.
inline EnvironmentLaw make_two_point_law(double p_low, double p_high, double weight_low) {
  if (!(p_low > 0.0 && p_low < 1.0)) {
    throw EllipticityViolation("atoms[0]: p_low must lie strictly inside (0,1)");
  }
  if (!(p_high > 0.0 && p_high < 1.0)) {
    throw EllipticityViolation("atoms[1]: p_high must lie strictly inside (0,1)");
  }
  if (p_low == p_high) throw DegenerateLaw("p_low == p_high gives a degenerate law");
  if (p_low > p_high) throw std::invalid_argument("p_low must not exceed p_high");
  if (!(weight_low > 0.0 && weight_low < 1.0)) {
    throw std::invalid_argument("weight_low must lie strictly inside (0,1)");
  }
  return EnvironmentLaw::finite({{p_low, weight_low}, {p_high, 1.0 - weight_low}});
}

/// E[rho^s] with rho = (1 - omega) / omega.
inline double rho_moment(const EnvironmentLaw& law, double s) {
  if (s == 0.0) return 1.0;
  return law.expect([s](double w) { return std::pow((1.0 - w) / w, s); });
}

/// d/ds E[rho^s].
inline double rho_moment_derivative(const EnvironmentLaw& law, double s) {
  return law.expect([s](double w) {
    const double lr = std::log((1.0 - w) / w);
    return std::exp(s * lr) * lr;
  });
}

enum class Regime {
  sinai,
  sub_ballistic,
  cauchy_boundary,
  ballistic_stable,
  critically_diffusive,
  diffusive
};

enum class Direction { recurrent, right_transient, left_transient };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::sinai: return "Sinai";
    case Regime::sub_ballistic: return "sub-ballistic";
    case Regime::cauchy_boundary: return "Cauchy-boundary";
    case Regime::ballistic_stable: return "ballistic-stable";
    case Regime::critically_diffusive: return "critically-diffusive";
    case Regime::diffusive: return "diffusive";
  }
  return "?";
}

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::recurrent: return "recurrent";
    case Direction::right_transient: return "right-transient";
    case Direction::left_transient: return "left-transient";
  }
  return "?";
}

inline constexpr double kRecurrenceTolerance = 1e-10;
inline constexpr double kRegimeBoundaryTolerance = 1e-9;

/// Regime from the fluctuation parameter s (s = 0 is Sinai, +inf diffusive).
inline Regime classify_regime(double s) {
  if (s == 0.0) return Regime::sinai;
  if (std::fabs(s - 1.0) < kRegimeBoundaryTolerance) return Regime::cauchy_boundary;
  if (std::fabs(s - 2.0) < kRegimeBoundaryTolerance) return Regime::critically_diffusive;
  if (s < 1.0) return Regime::sub_ballistic;
  if (s < 2.0) return Regime::ballistic_stable;
  return Regime::diffusive;
}

struct RegimeInfo {
  double log_rho_mean = 0.0;
  double s = 0.0;  ///< +inf when no root exists below s_max
  Regime regime = Regime::sinai;
  Direction direction = Direction::recurrent;
  bool bracketed = true;  ///< false when s is the +inf sentinel
};

struct SolveOptions {
  double tol = 1e-12;
  double s_max = 64.0;
};

namespace detail {

// Smallest doubling point s_hi <= s_max with E[rho^s_hi] > 1, for a law with
// E[log rho] < 0. Returns nullopt when every probe stays at or below 1.
inline std::optional<double> upper_bracket(const EnvironmentLaw& law, double s_max) {
  for (double s = 0.5; s <= s_max * (1.0 + 1e-15); s *= 2.0) {
    if (rho_moment(law, s) > 1.0) return s;
  }
  if (rho_moment(law, s_max) > 1.0) return s_max;
  return std::nullopt;
}

inline RegimeInfo finish(RegimeInfo info, Direction transient_dir) {
  info.regime = classify_regime(info.s);
  info.direction = transient_dir;
  return info;
}

}  // namespace detail

/// Fluctuation parameter: the positive root of E[rho^s] = 1 found by
/// bisection, with mirroring for left-transient laws.
inline RegimeInfo solve_s(const EnvironmentLaw& law, SolveOptions opt = {}) {
  RegimeInfo info;
  info.log_rho_mean = law.log_rho_mean();
  if (std::fabs(info.log_rho_mean) < kRecurrenceTolerance) {
    info.s = 0.0;
    info.regime = Regime::sinai;
    info.direction = Direction::recurrent;
    return info;
  }
  if (info.log_rho_mean > 0.0) {
    RegimeInfo m = solve_s(law.mirrored(), opt);
    m.log_rho_mean = info.log_rho_mean;
    m.direction = Direction::left_transient;
    return m;
  }
  const auto hi_opt = detail::upper_bracket(law, opt.s_max);
  if (!hi_opt) {
    info.s = std::numeric_limits<double>::infinity();
    info.bracketed = false;
    return detail::finish(info, Direction::right_transient);
  }
  // f(s) = E[rho^s] - 1 is convex, zero at 0 and negative just right of 0,
  // so bisection on [0, hi] keeps f(lo) <= 0 < f(hi).
  double lo = 0.0;
  double hi = *hi_opt;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = rho_moment(law, mid) - 1.0;
    if (f > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (std::fabs(f) < opt.tol && hi - lo < 1e-14 * std::max(1.0, hi)) break;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
  }
  info.s = 0.5 * (lo + hi);
  return detail::finish(info, Direction::right_transient);
}

/// Same root by Newton's method started right of the root; convexity of
/// E[rho^s] makes the iterates decrease monotonically onto it.
inline RegimeInfo solve_s_newton(const EnvironmentLaw& law, SolveOptions opt = {}) {
  RegimeInfo info;
  info.log_rho_mean = law.log_rho_mean();
  if (std::fabs(info.log_rho_mean) < kRecurrenceTolerance) return info;
  if (info.log_rho_mean > 0.0) {
    RegimeInfo m = solve_s_newton(law.mirrored(), opt);
    m.log_rho_mean = info.log_rho_mean;
    m.direction = Direction::left_transient;
    return m;
  }
  const auto hi_opt = detail::upper_bracket(law, opt.s_max);
  if (!hi_opt) {
    info.s = std::numeric_limits<double>::infinity();
    info.bracketed = false;
    return detail::finish(info, Direction::right_transient);
  }
  double s = *hi_opt;
  for (int it = 0; it < 200; ++it) {
    const double f = rho_moment(law, s) - 1.0;
    const double df = rho_moment_derivative(law, s);
    const double next = s - f / df;
    if (!(next < s)) break;
    s = next;
    if (std::fabs(f) < opt.tol * 1e-3) break;
  }
  info.s = s;
  return detail::finish(info, Direction::right_transient);
}

/// One site value from the law.
template <class Rng>
double sample_site(const EnvironmentLaw& law, Rng& rng) {
  return law.sample(rng);
}

/// Two-point law on {p_low, p_high} whose weight is chosen so that
/// E[rho^s] = 1 for the requested s. Requires rho(p_low) > 1 > rho(p_high).
inline EnvironmentLaw two_point_law_with_s(double p_low, double p_high, double s) {
  const double rl = std::pow((1.0 - p_low) / p_low, s);
  const double rh = std::pow((1.0 - p_high) / p_high, s);
  if (!(rl > 1.0 && rh < 1.0)) {
    throw std::invalid_argument("need rho(p_low) > 1 > rho(p_high)");
  }
  return make_two_point_law(p_low, p_high, (1.0 - rh) / (rl - rh));
}

}  // namespace rwcre

#endif  // RWCRE_ENVIRONMENT_HPP
