#ifndef RWCRE_WALKER_HPP
#define RWCRE_WALKER_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "rwcre/environment.hpp"
#include "rwcre/resampling.hpp"
#include "rwcre/rng.hpp"

namespace rwcre {

/// Site value of generation `generation` at `site` for the environment
/// family keyed by `env_key`. Each (generation, site) pair owns a stream, so
/// the value does not depend on the order in which sites are visited.
inline double site_value(const EnvironmentLaw& law, std::uint64_t env_key,
                         std::uint64_t generation, std::int64_t site) {
  Stream s(derive_key(derive_key(env_key, "generation", generation), "site", zigzag(site)));
  return law.sample(s);
}

/// One environment generation, realised lazily on the window of sites a walk
/// actually visits. Storage is a flat window that grows by doubling; values
/// are stamped with a realisation id so that `reset` is O(1).
class EnvironmentRealization {
 public:
  /// Realisation driven by a law and an environment key.
  EnvironmentRealization(const EnvironmentLaw& law, std::uint64_t env_key,
                         std::uint64_t generation = 1)
      : law_(&law), env_key_(env_key), generation_(generation) {}

  /// Homogeneous environment omega(x) = p for every site.
  static EnvironmentRealization constant(double p) {
    EnvironmentRealization r;
    r.constant_ = p;
    return r;
  }

  std::uint64_t generation() const noexcept { return generation_; }
  std::uint64_t sampled_sites() const noexcept { return sampled_; }

  /// Switch to another generation (and optionally another key), forgetting
  /// every cached value.
  void reset(std::uint64_t generation, std::optional<std::uint64_t> env_key = std::nullopt) {
    generation_ = generation;
    if (env_key) env_key_ = *env_key;
    ++stamp_;
    sampled_ = 0;
  }

  double operator()(std::int64_t x) {
    if (constant_) return *constant_;
    if (values_.empty()) grow_to(x);
    std::int64_t idx = x - origin_;
    if (idx < 0 || idx >= static_cast<std::int64_t>(values_.size())) {
      grow_to(x);
      idx = x - origin_;
    }
    const auto i = static_cast<std::size_t>(idx);
    if (stamps_[i] != stamp_) {
      stamps_[i] = stamp_;
      values_[i] = site_value(*law_, env_key_, generation_, x);
      ++sampled_;
    }
    return values_[i];
  }

 private:
  EnvironmentRealization() = default;

  void grow_to(std::int64_t x) {
    if (values_.empty()) {
      origin_ = x - 32;
      values_.assign(64, 0.0);
      stamps_.assign(64, 0);
      return;
    }
    const auto size = static_cast<std::int64_t>(values_.size());
    std::int64_t lo = origin_;
    std::int64_t hi = origin_ + size;
    std::int64_t new_size = size;
    while (x < lo || x >= hi) {
      new_size *= 2;
      const std::int64_t extra = new_size - (hi - lo);
      if (x < lo) {
        lo -= extra;
      } else {
        hi += extra;
      }
    }
    std::vector<double> values(static_cast<std::size_t>(hi - lo), 0.0);
    std::vector<std::uint64_t> stamps(static_cast<std::size_t>(hi - lo), 0);
    const auto shift = static_cast<std::size_t>(origin_ - lo);
    std::copy(values_.begin(), values_.end(), values.begin() + static_cast<std::ptrdiff_t>(shift));
    std::copy(stamps_.begin(), stamps_.end(), stamps.begin() + static_cast<std::ptrdiff_t>(shift));
    values_.swap(values);
    stamps_.swap(stamps);
    origin_ = lo;
  }

  const EnvironmentLaw* law_ = nullptr;
  std::uint64_t env_key_ = 0;
  std::uint64_t generation_ = 1;
  std::optional<double> constant_;
  std::int64_t origin_ = 0;
  std::vector<double> values_;
  std::vector<std::uint64_t> stamps_;
  std::uint64_t stamp_ = 1;
  std::uint64_t sampled_ = 0;
};

struct RwreResult {
  std::int64_t displacement = 0;
  std::vector<std::int64_t> path;  ///< Z_0..Z_T when recording
};

/// Nearest-neighbour walk in a fixed environment for `steps` steps.
template <class Rng>
std::int64_t walk(EnvironmentRealization& env, std::int64_t start, Tick steps, Rng& rng,
                  std::vector<std::int64_t>* path = nullptr) {
  std::int64_t x = start;
  if (path) path->push_back(x);
  for (Tick t = 0; t < steps; ++t) {
    x += uniform01(rng) < env(x) ? 1 : -1;
    if (path) path->push_back(x);
  }
  return x;
}

template <class Rng>
RwreResult simulate_rwre(EnvironmentRealization& env, std::int64_t start, Tick steps, Rng& rng,
                         bool record = false) {
  RwreResult out;
  const std::int64_t end = walk(env, start, steps, rng, record ? &out.path : nullptr);
  out.displacement = end - start;
  return out;
}

/// Refreshed increments Y_k, boundary increment and positions at refresh
/// times. X_n = sum Y_k + boundary exactly.
struct BlockDecomposition {
  std::vector<std::int64_t> increments;      ///< Y_k, k < ell_n
  std::int64_t boundary = 0;                  ///< Ybar^n
  std::vector<std::int64_t> refresh_positions;  ///< X_{tau(k)}, k < ell_n

  std::int64_t total() const {
    std::int64_t acc = boundary;
    for (auto y : increments) acc += y;
    return acc;
  }
};

enum class SamplingMode { annealed, quenched };

/// Seeds for one RWCRE replica. Walk noise and environment noise live on
/// separate sub-streams of the master seed. In quenched mode the environment
/// sub-stream comes from `env_seed` and is shared by every replica.
struct ReplicaSeed {
  std::uint64_t master = 0;
  std::uint64_t replica = 0;
  SamplingMode mode = SamplingMode::annealed;
  std::uint64_t env_seed = 0;

  std::uint64_t walk_key() const { return derive_key(master, "walk", replica); }
  std::uint64_t env_key() const {
    return mode == SamplingMode::annealed ? derive_key(master, "env", replica)
                                          : derive_key(env_seed, "env", 0);
  }
};

struct RwcreResult {
  std::int64_t position = 0;
  BlockDecomposition decomposition;
  std::vector<std::int64_t> checkpoints;  ///< X at requested times
};

/// Reusable per-worker scratch: avoids reallocating the environment window
/// for every block.
class RwcreSimulator {
 public:
  RwcreSimulator(const EnvironmentLaw& law, const ResamplingMap& map)
      : law_(law), map_(map), env_(law, 0) {}

  /// Walk n steps. `checkpoints` (sorted, <= n) records X at those times.
  RwcreResult run(Tick n, const ReplicaSeed& seed, bool record_decomposition = true,
                  std::span<const Tick> checkpoints = {}) {
    RwcreResult out;
    Stream rng(seed.walk_key());
    const std::uint64_t env_key = seed.env_key();
    std::int64_t x = 0;
    Tick elapsed = 0;
    std::size_t next_cp = 0;
    auto flush_checkpoints = [&](Tick upto, std::int64_t pos) {
      while (next_cp < checkpoints.size() && checkpoints[next_cp] <= upto) {
        if (checkpoints[next_cp] == upto) out.checkpoints.push_back(pos);
        ++next_cp;
      }
    };
    flush_checkpoints(0, 0);
    for (std::uint64_t k = 1;; ++k) {
      const Tick t = map_.increment(k);
      const Tick remaining = n - elapsed;
      const bool completes = t != kInfinite && t <= remaining;
      const Tick len = completes ? t : remaining;
      env_.reset(k, env_key);
      const std::int64_t start = x;
      // Step in segments so that checkpoints inside the block are recorded.
      Tick done = 0;
      while (done < len) {
        Tick seg = len - done;
        if (next_cp < checkpoints.size()) {
          const Tick target = checkpoints[next_cp];
          if (target > elapsed + done && target <= elapsed + len) {
            seg = target - (elapsed + done);
          }
        }
        x = walk(env_, x, seg, rng);
        done += seg;
        flush_checkpoints(elapsed + done, x);
      }
      elapsed += len;
      if (completes) {
        if (record_decomposition) {
          out.decomposition.increments.push_back(x - start);
          out.decomposition.refresh_positions.push_back(x);
        }
      } else {
        out.decomposition.boundary = x - start;
        break;
      }
      if (elapsed == n) break;
    }
    out.position = x;
    return out;
  }

 private:
  const EnvironmentLaw& law_;
  const ResamplingMap& map_;
  EnvironmentRealization env_;
};

/// Single replica of the walk in cooling random environment.
inline RwcreResult simulate_rwcre(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                                  const ReplicaSeed& seed) {
  RwcreSimulator sim(law, map);
  return sim.run(n, seed);
}

//---------------------------------------------------------------------------//
// Synthetic counterexample to the strong law
//---------------------------------------------------------------------------//

/// Outcome probabilities of g_m(U) for U uniform on (0,1):
///   +1 on (0, 1/(2 log2(1+m))),
///   -1 on [1/(2 log2 m), 1/log2(1+m)),
///    0 elsewhere.
/// Masses are given through log2(m) and log2(1+m) so that astronomically
/// large m can be handled.
struct CounterexampleFamily {
  struct Bands {
    double plus_hi = 0.0;   ///< right edge of the +1 band
    double minus_lo = 0.0;  ///< left edge of the -1 band
    double minus_hi = 0.0;  ///< right edge of the -1 band
    double p_plus() const { return plus_hi; }
    double p_minus() const { return std::max(0.0, minus_hi - minus_lo); }
  };

  static Bands bands(double log2_m, double log2_1pm) {
    Bands b;
    b.plus_hi = std::min(1.0, 1.0 / (2.0 * log2_1pm));
    b.minus_lo = log2_m > 0.0 ? 1.0 / (2.0 * log2_m) : std::numeric_limits<double>::infinity();
    b.minus_hi = std::min(1.0, 1.0 / log2_1pm);
    return b;
  }

  static Bands bands(double m) { return bands(std::log2(m), std::log2(1.0 + m)); }

  /// g_m(u) in {-1, 0, +1}.
  static int value(const Bands& b, double u) {
    if (u > 0.0 && u < b.plus_hi) return 1;
    if (u >= b.minus_lo && u < b.minus_hi) return -1;
    return 0;
  }
};

/// Schedule tau(k) = base^k - 1, i.e. T_k = base^k - base^{k-1}, described in
/// log space so that it can run for thousands of blocks.
struct GeometricSchedule {
  double base = 4.0;

  double log2_increment(std::uint64_t k) const {
    // log2(base^{k-1} (base - 1))
    return static_cast<double>(k - 1) * std::log2(base) + std::log2(base - 1.0);
  }
  double log2_one_plus_increment(std::uint64_t k) const {
    const double l = log2_increment(k);
    return l > 60.0 ? l : std::log2(1.0 + std::exp2(l));
  }
  /// tau(k-1) / tau(k) = (base^{k-1} - 1) / (base^k - 1), evaluated stably.
  double previous_fraction(std::uint64_t k) const {
    if (k <= 1) return 0.0;
    const double q = std::pow(base, -static_cast<double>(k - 1));
    return (1.0 - q) / (base - q);
  }
};

struct CounterexamplePath {
  std::vector<int> block_values;  ///< X^{(k)}_{T_k} / T_k
  std::vector<double> ratios;     ///< X_{tau(k)} / tau(k)
};

/// Gradual-sum values X_{tau(k)}/tau(k), k <= K, drawn block by block in O(K).
template <class Rng>
CounterexamplePath sample_counterexample_path(const GeometricSchedule& schedule, std::uint64_t K,
                                              Rng& rng) {
  if (K < 1) throw std::invalid_argument("counterexample path needs K >= 1");
  CounterexamplePath out;
  out.block_values.reserve(K);
  out.ratios.reserve(K);
  double ratio = 0.0;
  for (std::uint64_t k = 1; k <= K; ++k) {
    const auto b = CounterexampleFamily::bands(schedule.log2_increment(k),
                                               schedule.log2_one_plus_increment(k));
    const int g = CounterexampleFamily::value(b, open_uniform01(rng));
    const double r = schedule.previous_fraction(k);
    ratio = r * ratio + (1.0 - r) * g;
    out.block_values.push_back(g);
    out.ratios.push_back(ratio);
  }
  return out;
}

/// P(the path takes both values +1 and -1 among its first K blocks), by
/// inclusion-exclusion over independent blocks.
inline double counterexample_both_signs_probability(const GeometricSchedule& schedule,
                                                    std::uint64_t K) {
  long double log_no_plus = 0.0L;
  long double log_no_minus = 0.0L;
  long double log_neither = 0.0L;
  for (std::uint64_t k = 1; k <= K; ++k) {
    const auto b = CounterexampleFamily::bands(schedule.log2_increment(k),
                                               schedule.log2_one_plus_increment(k));
    log_no_plus += std::log1p(-static_cast<long double>(b.p_plus()));
    log_no_minus += std::log1p(-static_cast<long double>(b.p_minus()));
    log_neither += std::log1p(-static_cast<long double>(b.p_plus() + b.p_minus()));
  }
  return static_cast<double>(1.0L - std::exp(log_no_plus) - std::exp(log_no_minus) +
                             std::exp(log_neither));
}

/// P(some block among the first K takes the value +1).
inline double counterexample_hit_plus_probability(const GeometricSchedule& schedule,
                                                  std::uint64_t K) {
  long double log_no_plus = 0.0L;
  for (std::uint64_t k = 1; k <= K; ++k) {
    const auto b = CounterexampleFamily::bands(schedule.log2_increment(k),
                                               schedule.log2_one_plus_increment(k));
    log_no_plus += std::log1p(-static_cast<long double>(b.p_plus()));
  }
  return static_cast<double>(1.0L - std::exp(log_no_plus));
}

}  // namespace rwcre

#endif  // RWCRE_WALKER_HPP
