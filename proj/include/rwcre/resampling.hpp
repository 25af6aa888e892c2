#ifndef RWCRE_RESAMPLING_HPP
#define RWCRE_RESAMPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwcre/errors.hpp"

namespace rwcre {

/// Integer time (steps, block lengths).
using Tick = std::uint64_t;
/// Accumulated times; wide enough for sums of 64-bit increments.
using Wide = unsigned __int128;

/// Increment value standing for an infinite block (environment frozen).
inline constexpr Tick kInfinite = std::numeric_limits<Tick>::max();
inline constexpr Wide kWideInfinite = ~Wide{0};

enum class MapKind { identity, polynomial, exponential, frozen, explicit_list, custom };

enum class ListTail { freeze, cycle };

/// Resampling map described by its increments T_k = tau(k) - tau(k-1), k >= 1.
///
/// The map is a generator: `increment(k)` is a pure function of k, so
/// adversarial schedules are as easy to express as closed-form ones.
///  - identity:    T_k = 1
///  - polynomial:  T_k = max(1, round(A k^a))
///  - exponential: tau(k) = round(B e^{b k}) for k >= 1, increments clamped to
///                 at least 1
///  - frozen:      T_1 = infinity
///  - explicit:    listed increments, then frozen or cycled
///  - custom:      arbitrary rule k -> T_k (kInfinite allowed)
class ResamplingMap {
 public:
  using Rule = std::function<Tick(std::uint64_t)>;

  static ResamplingMap identity() {
    ResamplingMap m(MapKind::identity);
    return m;
  }

  static ResamplingMap polynomial(double A, double a) {
    if (!(A > 0.0 && a > 0.0)) throw std::invalid_argument("polynomial map needs A, a > 0");
    ResamplingMap m(MapKind::polynomial);
    m.p1_ = A;
    m.p2_ = a;
    return m;
  }

  static ResamplingMap exponential(double B, double b) {
    if (!(B > 0.0 && b > 0.0)) throw std::invalid_argument("exponential map needs B, b > 0");
    ResamplingMap m(MapKind::exponential);
    m.p1_ = B;
    m.p2_ = b;
    return m;
  }

  static ResamplingMap frozen() { return ResamplingMap(MapKind::frozen); }

  static ResamplingMap explicit_list(std::vector<Tick> increments,
                                     ListTail tail = ListTail::freeze) {
    if (increments.empty()) throw std::invalid_argument("explicit map needs increments");
    for (std::size_t i = 0; i < increments.size(); ++i) {
      if (increments[i] < 1) {
        throw std::invalid_argument("increments[" + std::to_string(i) + "]: must be >= 1");
      }
    }
    ResamplingMap m(MapKind::explicit_list);
    m.list_ = std::make_shared<const std::vector<Tick>>(std::move(increments));
    m.tail_ = tail;
    return m;
  }

  static ResamplingMap custom(Rule rule, std::string name = "custom") {
    ResamplingMap m(MapKind::custom);
    m.rule_ = std::move(rule);
    m.name_ = std::move(name);
    return m;
  }

  MapKind kind() const noexcept { return kind_; }
  double param1() const noexcept { return p1_; }
  double param2() const noexcept { return p2_; }
  const std::string& name() const noexcept { return name_; }
  std::span<const Tick> listed() const noexcept {
    return list_ ? std::span<const Tick>(*list_) : std::span<const Tick>{};
  }
  ListTail tail() const noexcept { return tail_; }

  /// T_k for k >= 1; kInfinite means the environment never refreshes again.
  Tick increment(std::uint64_t k) const {
    switch (kind_) {
      case MapKind::identity:
        return 1;
      case MapKind::polynomial: {
        const double v = std::round(p1_ * std::pow(static_cast<double>(k), p2_));
        if (!(v < 1.8e19)) return kInfinite;
        return std::max<Tick>(1, static_cast<Tick>(v));
      }
      case MapKind::exponential: {
        const double hi = exp_tau(k);
        const double lo = k == 1 ? 0.0 : exp_tau(k - 1);
        if (!(hi < 1.8e19)) return kInfinite;
        return std::max<Tick>(1, static_cast<Tick>(hi - lo));
      }
      case MapKind::frozen:
        return kInfinite;
      case MapKind::explicit_list: {
        const auto& l = *list_;
        if (k <= l.size()) return l[k - 1];
        if (tail_ == ListTail::freeze) return kInfinite;
        return l[(k - 1) % l.size()];
      }
      case MapKind::custom: {
        const Tick t = rule_(k);
        if (t < 1) throw std::invalid_argument("custom map produced an increment below 1");
        return t;
      }
    }
    return kInfinite;
  }

  /// tau(k) = T_1 + ... + T_k, saturating at kWideInfinite.
  Wide tau(std::uint64_t k) const {
    Wide acc = 0;
    for (std::uint64_t j = 1; j <= k; ++j) {
      const Tick t = increment(j);
      if (t == kInfinite) return kWideInfinite;
      acc += t;
    }
    return acc;
  }

 private:
  explicit ResamplingMap(MapKind kind) : kind_(kind) {}

  double exp_tau(std::uint64_t k) const {
    return std::round(p1_ * std::exp(p2_ * static_cast<double>(k)));
  }

  MapKind kind_;
  double p1_ = 0.0;
  double p2_ = 0.0;
  std::shared_ptr<const std::vector<Tick>> list_;
  ListTail tail_ = ListTail::freeze;
  Rule rule_;
  std::string name_;
};

/// Exact partition of [0, n] into completed blocks and a boundary block.
struct BlockSchedule {
  Tick n = 0;
  std::uint64_t ell = 1;       ///< inf{k : tau(k) > n}
  std::vector<Tick> lengths;   ///< T_{k,n} = T_k for k < ell
  Tick boundary = 0;           ///< n - tau(ell - 1)

  std::size_t completed() const noexcept { return lengths.size(); }

  /// Weight T_{k,n} / n of block k (1-based; k == ell is the boundary).
  double gamma(std::uint64_t k) const {
    if (n == 0) return 0.0;
    const Tick t = k < ell ? lengths.at(k - 1) : (k == ell ? boundary : 0);
    return static_cast<double>(t) / static_cast<double>(n);
  }

  /// Sum of all piece lengths; equals n by construction.
  Wide total() const {
    Wide acc = boundary;
    for (Tick t : lengths) acc += t;
    return acc;
  }
};

/// ell_n = inf{k : tau(k) > n}.
inline std::uint64_t block_index(const ResamplingMap& map, Tick n) {
  Wide acc = 0;
  for (std::uint64_t k = 1;; ++k) {
    const Tick t = map.increment(k);
    if (t == kInfinite) return k;
    acc += t;
    if (acc > n) return k;
  }
}

inline BlockSchedule schedule_at(const ResamplingMap& map, Tick n) {
  BlockSchedule sch;
  sch.n = n;
  Wide acc = 0;
  for (std::uint64_t k = 1;; ++k) {
    const Tick t = map.increment(k);
    if (t == kInfinite || acc + t > n) {
      sch.ell = k;
      sch.boundary = static_cast<Tick>(n - acc);
      return sch;
    }
    acc += t;
    sch.lengths.push_back(t);
  }
}

/// Exact rational number with 128-bit parts.
struct Ratio {
  Wide num = 0;
  Wide den = 1;
  double value() const {
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  }
};

struct MassPoint {
  Wide length = 0;
  Ratio mass;
};

/// mu_t = sum_k (m_{k,t}/t) delta_{m_{k,t}} together with the frequency
/// measure F_t that gives each positive piece the same weight. Equal piece
/// lengths are merged into one support point.
struct EmpiricalMassMeasure {
  Wide t = 0;
  std::uint64_t pieces = 0;           ///< number of positive pieces
  std::vector<MassPoint> mass;        ///< sorted by length
  std::vector<MassPoint> frequency;   ///< sorted by length

  double mass_at(Wide length) const {
    for (const auto& p : mass) {
      if (p.length == length) return p.mass.value();
    }
    return 0.0;
  }

  /// Sum of numerators of `mass`; equals t exactly.
  Wide mass_numerator_total() const {
    Wide acc = 0;
    for (const auto& p : mass) acc += p.mass.num;
    return acc;
  }
};

/// Truncated pieces m_{k,t} = tau(k) ^ t - tau(k-1) ^ t of a mass sequence,
/// up to and including the first piece that reaches t. Zero pieces are
/// dropped.
inline std::vector<Wide> truncated_pieces(std::span<const Wide> masses, Wide t) {
  std::vector<Wide> out;
  Wide acc = 0;
  for (Wide m : masses) {
    if (acc >= t) break;
    const Wide piece = (m >= t - acc) ? t - acc : m;
    out.push_back(piece);
    acc += piece;
  }
  if (acc < t) throw std::invalid_argument("mass sequence too short to reach t");
  return out;
}

inline EmpiricalMassMeasure empirical_mass_from_pieces(const std::vector<Wide>& pieces, Wide t) {
  EmpiricalMassMeasure mu;
  mu.t = t;
  std::map<Wide, Wide> by_length;
  std::map<Wide, std::uint64_t> counts;
  for (Wide p : pieces) {
    if (p == 0) continue;
    by_length[p] += p;
    counts[p] += 1;
    ++mu.pieces;
  }
  for (const auto& [len, total] : by_length) mu.mass.push_back({len, {total, t}});
  for (const auto& [len, c] : counts) mu.frequency.push_back({len, {c, mu.pieces}});
  return mu;
}

inline EmpiricalMassMeasure empirical_mass(const ResamplingMap& map, Tick t) {
  if (t < 1) throw std::invalid_argument("empirical_mass needs t >= 1");
  const BlockSchedule sch = schedule_at(map, t);
  std::vector<Wide> pieces(sch.lengths.begin(), sch.lengths.end());
  pieces.push_back(sch.boundary);
  return empirical_mass_from_pieces(pieces, t);
}

/// Empirical mass measure of an explicit (possibly huge) mass sequence.
inline EmpiricalMassMeasure empirical_mass(std::span<const Wide> masses, Wide t) {
  if (t < 1) throw std::invalid_argument("empirical_mass needs t >= 1");
  return empirical_mass_from_pieces(truncated_pieces(masses, t), t);
}

//---------------------------------------------------------------------------//
// Phase diagnostics
//---------------------------------------------------------------------------//

enum class PolyPhaseKind { gaussian, critical, stable };

struct PolyPhase {
  PolyPhaseKind kind = PolyPhaseKind::gaussian;
  double beta = 0.0;              ///< Gaussian scaling exponent (gaussian only)
  double critical_exponent = 0.0; ///< a_c = 1 / (s - 1)
  double stable_exponent = 0.0;   ///< 1 / s
};

/// Gaussian / critical / stable classification for T_k ~ A k^a at s in (1,2).
inline PolyPhase classify_poly_phase(double a, double s) {
  if (!(a > 0.0)) throw std::invalid_argument("polynomial exponent must be positive");
  if (!(s > 1.0 && s < 2.0)) throw std::invalid_argument("s must lie in (1,2)");
  PolyPhase out;
  out.critical_exponent = 1.0 / (s - 1.0);
  out.stable_exponent = 1.0 / s;
  if (std::fabs(a - out.critical_exponent) < 1e-12) {
    out.kind = PolyPhaseKind::critical;
  } else if (a < out.critical_exponent) {
    out.kind = PolyPhaseKind::gaussian;
    out.beta = (a * (3.0 - s) + 1.0) / (2.0 * (a + 1.0));
  } else {
    out.kind = PolyPhaseKind::stable;
  }
  return out;
}

struct GProfile {
  std::uint64_t blocks = 0;
  double s = 0.0;
  std::vector<double> x;
  std::vector<double> g;
  double g_infinity = 0.0;  ///< value at the largest grid point
};

/// g_n(x) = sum_{k<=n} T_k 1{T_k < x tau(n)^{1/s}} / tau(n).
inline GProfile g_profile(const ResamplingMap& map, std::uint64_t n, double s,
                          std::span<const double> x_grid) {
  if (!(s > 1.0 && s < 2.0)) throw std::invalid_argument("g_profile needs s in (1,2)");
  if (n < 1) throw std::invalid_argument("g_profile needs n >= 1");
  std::vector<double> lengths;
  lengths.reserve(n);
  long double tau = 0.0L;
  for (std::uint64_t k = 1; k <= n; ++k) {
    const Tick t = map.increment(k);
    if (t == kInfinite) throw std::invalid_argument("g_profile needs finite increments");
    lengths.push_back(static_cast<double>(t));
    tau += static_cast<long double>(t);
  }
  std::sort(lengths.begin(), lengths.end());
  std::vector<long double> prefix(lengths.size() + 1, 0.0L);
  for (std::size_t i = 0; i < lengths.size(); ++i) prefix[i + 1] = prefix[i] + lengths[i];
  const double scale = std::pow(static_cast<double>(tau), 1.0 / s);

  GProfile out;
  out.blocks = n;
  out.s = s;
  out.x.assign(x_grid.begin(), x_grid.end());
  std::vector<double> sorted_x = out.x;
  std::sort(sorted_x.begin(), sorted_x.end());
  for (double x : out.x) {
    const double cut = x * scale;
    const auto idx = static_cast<std::size_t>(
        std::lower_bound(lengths.begin(), lengths.end(), cut) - lengths.begin());
    out.g.push_back(static_cast<double>(prefix[idx] / tau));
  }
  if (!sorted_x.empty()) {
    const auto it = std::find(out.x.begin(), out.x.end(), sorted_x.back());
    out.g_infinity = out.g[static_cast<std::size_t>(it - out.x.begin())];
  }
  return out;
}

/// Finite-window evidence about cooling and homogenisation. Nothing here is
/// a statement about limits; each number is tied to `window`.
struct CoolingDiagnostics {
  std::uint64_t window = 0;
  Tick tail_min = 0;             ///< min T_k over k in (window/2, window]
  Tick tail_min_previous = 0;    ///< min T_k over k in (window/4, window/2]
  bool is_cooling_window = false;
  double cesaro_mean = 0.0;      ///< (1/window) sum_{k<=window} T_k
  double max_ratio_tau = 0.0;    ///< max T_k / tau(k) over the tail window
  double max_ratio_sqrt_tau = 0.0;  ///< max T_k / sqrt(tau(k)) over the tail window
  double l1_distance = 0.0;      ///< sum_T T |nu_w(T) - nu_{w/2}(T)|
  double l2_distance = 0.0;      ///< sum_T T^2 |nu_w(T) - nu_{w/2}(T)|
};

inline CoolingDiagnostics cooling_diagnostics(const ResamplingMap& map, std::uint64_t window) {
  if (window < 2) throw std::invalid_argument("cooling_diagnostics needs window >= 2");
  CoolingDiagnostics d;
  d.window = window;
  const std::uint64_t half = window / 2;
  const std::uint64_t quarter = window / 4;
  std::map<Tick, std::uint64_t> nu_full;
  std::map<Tick, std::uint64_t> nu_half;
  long double tau = 0.0L;
  long double sum = 0.0L;
  d.tail_min = kInfinite;
  d.tail_min_previous = kInfinite;
  for (std::uint64_t k = 1; k <= window; ++k) {
    const Tick t = map.increment(k);
    if (t == kInfinite) throw std::invalid_argument("cooling_diagnostics needs finite increments");
    tau += static_cast<long double>(t);
    sum += static_cast<long double>(t);
    nu_full[t] += 1;
    if (k <= half) nu_half[t] += 1;
    if (k > half) {
      d.tail_min = std::min(d.tail_min, t);
      const double td = static_cast<double>(t);
      d.max_ratio_tau = std::max(d.max_ratio_tau, td / static_cast<double>(tau));
      d.max_ratio_sqrt_tau =
          std::max(d.max_ratio_sqrt_tau, td / std::sqrt(static_cast<double>(tau)));
    } else if (k > quarter) {
      d.tail_min_previous = std::min(d.tail_min_previous, t);
    }
  }
  if (d.tail_min_previous == kInfinite) d.tail_min_previous = d.tail_min;
  d.is_cooling_window = d.tail_min > std::max<Tick>(1, d.tail_min_previous);
  d.cesaro_mean = static_cast<double>(sum / static_cast<long double>(window));
  std::map<Tick, std::pair<double, double>> both;
  for (const auto& [t, c] : nu_full) both[t].first = static_cast<double>(c) / window;
  for (const auto& [t, c] : nu_half) both[t].second = static_cast<double>(c) / half;
  for (const auto& [t, pr] : both) {
    const double diff = std::fabs(pr.first - pr.second);
    const double td = static_cast<double>(t);
    d.l1_distance += td * diff;
    d.l2_distance += td * td * diff;
  }
  return d;
}

/// Stable-limit sufficient conditions, evaluated on a finite prefix.
struct StableConditionReport {
  std::uint64_t window = 0;
  double s1_sup = 0.0;           ///< max_{n<=window} sum_{k<=n} (T_k/tau(n))^{1/s}
  double s1_at_window = 0.0;
  double s1_at_half = 0.0;
  std::vector<std::pair<Tick, double>> s1_small_block;  ///< cutoff m -> remainder
  double s2_at_window = 0.0;     ///< max_k T_k (log T_k)^{4s} / tau(window)
  double s2_at_half = 0.0;
  bool s1_holds = false;
  bool s2_holds = false;
};

inline StableConditionReport stable_conditions(const ResamplingMap& map, std::uint64_t window,
                                               double s) {
  if (window < 2) throw std::invalid_argument("stable_conditions needs window >= 2");
  StableConditionReport r;
  r.window = window;
  const double inv_s = 1.0 / s;
  std::vector<double> T;
  T.reserve(window);
  for (std::uint64_t k = 1; k <= window; ++k) {
    const Tick t = map.increment(k);
    if (t == kInfinite) throw std::invalid_argument("stable_conditions needs finite increments");
    T.push_back(static_cast<double>(t));
  }
  // sum_k (T_k / tau(n))^{1/s} = tau(n)^{-1/s} sum_k T_k^{1/s}
  long double tau = 0.0L;
  long double powsum = 0.0L;
  double max_s2_num = 0.0;
  const std::uint64_t half = window / 2;
  for (std::uint64_t n = 1; n <= window; ++n) {
    const double t = T[n - 1];
    tau += t;
    powsum += std::pow(t, inv_s);
    const double value = static_cast<double>(powsum / std::pow(tau, static_cast<long double>(inv_s)));
    r.s1_sup = std::max(r.s1_sup, value);
    if (t > 1.0) max_s2_num = std::max(max_s2_num, t * std::pow(std::log(t), 4.0 * s));
    if (n == half) {
      r.s1_at_half = value;
      r.s2_at_half = max_s2_num / static_cast<double>(tau);
    }
    if (n == window) {
      r.s1_at_window = value;
      r.s2_at_window = max_s2_num / static_cast<double>(tau);
    }
  }
  const double scale = std::pow(static_cast<double>(tau), inv_s);
  for (Tick m : {Tick{2}, Tick{8}, Tick{32}}) {
    long double acc = 0.0L;
    for (double t : T) {
      if (t < static_cast<double>(m)) acc += std::pow(t, inv_s);
    }
    r.s1_small_block.emplace_back(m, static_cast<double>(acc / scale));
  }
  r.s1_holds = r.s1_at_window <= 1.5 * r.s1_at_half && r.s1_small_block.back().second < 0.05;
  r.s2_holds = r.s2_at_window < r.s2_at_half;
  return r;
}

/// Aggregate phase report for s in (1,2).
struct PhaseReport {
  CoolingDiagnostics cooling;
  GProfile g;
  StableConditionReport stable;
  std::optional<PolyPhase> poly_phase;  ///< set for polynomial maps
};

inline PhaseReport phase_report(const ResamplingMap& map, std::uint64_t window, double s,
                                std::span<const double> x_grid) {
  PhaseReport rep;
  rep.cooling = cooling_diagnostics(map, window);
  rep.g = g_profile(map, window, s, x_grid);
  rep.stable = stable_conditions(map, window, s);
  if (map.kind() == MapKind::polynomial) rep.poly_phase = classify_poly_phase(map.param2(), s);
  return rep;
}

}  // namespace rwcre

#endif  // RWCRE_RESAMPLING_HPP
