#ifndef RWCRE_ESTIMATORS_HPP
#define RWCRE_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rwcre/block_law.hpp"
#include "rwcre/environment.hpp"
#include "rwcre/errors.hpp"
#include "rwcre/parallel.hpp"
#include "rwcre/resampling.hpp"
#include "rwcre/walker.hpp"

namespace rwcre {

using Int128 = __int128;

//---------------------------------------------------------------------------//
// Replica batches
//---------------------------------------------------------------------------//

/// Integer histogram of a block increment on [-T, T].
struct Histogram {
  Tick length = 0;
  std::vector<std::uint64_t> counts;

  Histogram() = default;
  explicit Histogram(Tick T) : length(T), counts(static_cast<std::size_t>(2 * T + 1), 0) {}

  void add(std::int64_t y) { ++counts[static_cast<std::size_t>(y + static_cast<std::int64_t>(length))]; }

  void merge(const Histogram& other) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  }

  std::uint64_t total() const {
    std::uint64_t acc = 0;
    for (auto c : counts) acc += c;
    return acc;
  }

  template <class F>
  void for_each(F&& f) const {
    const auto T = static_cast<std::int64_t>(length);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] != 0) f(static_cast<std::int64_t>(i) - T, counts[i]);
    }
  }

  double mean() const {
    Int128 s = 0;
    for_each([&](std::int64_t y, std::uint64_t c) { s += static_cast<Int128>(y) * c; });
    return static_cast<double>(static_cast<long double>(s) / static_cast<long double>(total()));
  }

  /// Unbiased sample variance, computed from exact integer sums.
  double variance() const {
    const std::uint64_t r = total();
    if (r < 2) return 0.0;
    Int128 s1 = 0;
    Int128 s2 = 0;
    for_each([&](std::int64_t y, std::uint64_t c) {
      s1 += static_cast<Int128>(y) * c;
      s2 += static_cast<Int128>(y) * y * c;
    });
    const Int128 num = static_cast<Int128>(r) * s2 - s1 * s1;
    return static_cast<double>(static_cast<long double>(num) /
                               (static_cast<long double>(r) * static_cast<long double>(r - 1)));
  }
};

struct ReplicaOptions {
  unsigned workers = 0;  ///< 0: resolve_workers()
  SamplingMode mode = SamplingMode::annealed;
  std::uint64_t env_seed = 0;
  bool record_blocks = true;
  std::vector<Tick> checkpoints;  ///< sorted horizons <= n
};

/// Everything a batch of RWCRE replicas produced. Per-replica values are
/// stored by replica index; block laws are integer histograms, so merges are
/// exact and independent of the worker count.
struct ReplicaBatch {
  Tick n = 0;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  BlockSchedule schedule;
  std::vector<std::int64_t> positions;
  std::vector<std::vector<std::int64_t>> checkpoint_positions;  ///< [checkpoint][replica]
  std::vector<Histogram> blocks;
  Histogram boundary;
};

inline ReplicaBatch run_batch(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                              std::uint64_t replicas, std::uint64_t seed,
                              const ReplicaOptions& opt = {}) {
  ReplicaBatch batch;
  batch.n = n;
  batch.replicas = replicas;
  batch.seed = seed;
  batch.schedule = schedule_at(map, n);
  if (!std::is_sorted(opt.checkpoints.begin(), opt.checkpoints.end()) ||
      (!opt.checkpoints.empty() && opt.checkpoints.back() > n)) {
    throw std::invalid_argument("checkpoints must be sorted and <= n");
  }

  struct State {
    RwcreSimulator sim;
    std::vector<Histogram> blocks;
    Histogram boundary;
  };
  struct Out {
    std::int64_t position = 0;
    std::vector<std::int64_t> checkpoints;
  };
  const auto& sch = batch.schedule;
  auto make_state = [&]() {
    State st{RwcreSimulator(law, map), {}, Histogram(sch.boundary)};
    if (opt.record_blocks) {
      st.blocks.reserve(sch.lengths.size());
      for (Tick t : sch.lengths) st.blocks.emplace_back(t);
    }
    return st;
  };
  auto body = [&](State& st, std::uint64_t i) {
    ReplicaSeed rs{seed, i, opt.mode, opt.env_seed};
    RwcreResult r = st.sim.run(n, rs, opt.record_blocks, opt.checkpoints);
    if (opt.record_blocks) {
      for (std::size_t k = 0; k < r.decomposition.increments.size(); ++k) {
        st.blocks[k].add(r.decomposition.increments[k]);
      }
      st.boundary.add(r.decomposition.boundary);
    }
    return Out{r.position, std::move(r.checkpoints)};
  };
  auto [outs, states] = run_replicas_stateful<Out, State>(replicas, resolve_workers(opt.workers),
                                                          make_state, body);

  batch.positions.resize(replicas);
  batch.checkpoint_positions.assign(opt.checkpoints.size(), std::vector<std::int64_t>(replicas));
  for (std::uint64_t i = 0; i < replicas; ++i) {
    batch.positions[i] = outs[i].position;
    for (std::size_t c = 0; c < opt.checkpoints.size(); ++c) {
      batch.checkpoint_positions[c][i] = outs[i].checkpoints.at(c);
    }
  }
  if (opt.record_blocks) {
    batch.blocks = make_state().blocks;
    batch.boundary = Histogram(sch.boundary);
    for (const auto& st : states) {
      for (std::size_t k = 0; k < st.blocks.size(); ++k) batch.blocks[k].merge(st.blocks[k]);
      batch.boundary.merge(st.boundary);
    }
  }
  return batch;
}

//---------------------------------------------------------------------------//
// Moments
//---------------------------------------------------------------------------//

/// Sample moments of integer data from exact power sums.
struct SampleMoments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased
  double mean_se = 0.0;
  double variance_se = 0.0;
  double third_central = 0.0;
  double fourth_central = 0.0;
};

inline SampleMoments sample_moments(std::span<const std::int64_t> xs) {
  SampleMoments m;
  m.count = xs.size();
  if (xs.empty()) return m;
  Int128 s1 = 0;
  Int128 s2 = 0;
  long double s3 = 0.0L;
  long double s4 = 0.0L;
  for (auto x : xs) {
    s1 += x;
    s2 += static_cast<Int128>(x) * x;
  }
  const long double r = static_cast<long double>(xs.size());
  const long double mean = static_cast<long double>(s1) / r;
  for (auto x : xs) {
    const long double d = static_cast<long double>(x) - mean;
    s3 += d * d * d;
    s4 += d * d * d * d;
  }
  m.mean = static_cast<double>(mean);
  if (xs.size() >= 2) {
    const Int128 num = static_cast<Int128>(xs.size()) * s2 - s1 * s1;
    const long double var = static_cast<long double>(num) / (r * (r - 1.0L));
    const long double mu2 = static_cast<long double>(num) / (r * r);
    m.variance = static_cast<double>(var);
    m.mean_se = static_cast<double>(std::sqrt(var / r));
    m.third_central = static_cast<double>(s3 / r);
    m.fourth_central = static_cast<double>(s4 / r);
    const long double v4 = s4 / r - mu2 * mu2 * (r - 3.0L) / (r - 1.0L);
    m.variance_se = static_cast<double>(std::sqrt(std::max(0.0L, v4) / r));
  }
  return m;
}

struct MomentReport {
  Tick n = 0;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
  std::vector<double> block_variances;  ///< Var(Y_k), k < ell_n
  double boundary_variance = 0.0;       ///< Var(Ybar^n)
};

inline MomentReport moments_from_batch(const ReplicaBatch& b) {
  MomentReport rep;
  rep.n = b.n;
  rep.replicas = b.replicas;
  rep.seed = b.seed;
  const SampleMoments m = sample_moments(b.positions);
  rep.mean = m.mean;
  rep.mean_se = m.mean_se;
  rep.variance = m.variance;
  rep.variance_se = m.variance_se;
  rep.block_variances.reserve(b.blocks.size());
  for (const auto& h : b.blocks) rep.block_variances.push_back(h.variance());
  rep.boundary_variance = b.boundary.counts.empty() ? 0.0 : b.boundary.variance();
  return rep;
}

inline MomentReport mc_moments(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                               std::uint64_t replicas, std::uint64_t seed,
                               const ReplicaOptions& opt = {}) {
  if (replicas < 2) throw BudgetTooSmall("mc_moments needs at least 2 replicas");
  return moments_from_batch(run_batch(law, map, n, replicas, seed, opt));
}

//---------------------------------------------------------------------------//
// Variance profile
//---------------------------------------------------------------------------//

/// lambda_k = sd(Y_k) / sqrt(sum_j Var(Y_j) + Var(Ybar^n)). The boundary
/// block is the last entry of `lambda`.
struct MassProfile {
  std::vector<double> lambda;
  std::vector<double> sorted;  ///< lambda in nonincreasing order
  std::size_t boundary_index = 0;
  double total_variance = 0.0;

  double boundary() const { return lambda.at(boundary_index); }
  double norm_squared() const {
    double acc = 0.0;
    for (double l : lambda) acc += l * l;
    return acc;
  }
};

inline MassProfile profile_from_variances(std::span<const double> block_variances,
                                          double boundary_variance) {
  MassProfile p;
  std::vector<double> vars(block_variances.begin(), block_variances.end());
  vars.push_back(boundary_variance);
  double total = 0.0;
  for (double v : vars) total += v;
  p.total_variance = total;
  p.boundary_index = vars.size() - 1;
  p.lambda.resize(vars.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t k = 0; k < vars.size(); ++k) p.lambda[k] = std::sqrt(vars[k] / total);
  }
  p.sorted = p.lambda;
  std::sort(p.sorted.begin(), p.sorted.end(), std::greater<>());
  return p;
}

inline MassProfile variance_profile(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                                    std::uint64_t replicas, std::uint64_t seed,
                                    const ReplicaOptions& opt = {}) {
  const MomentReport rep = mc_moments(law, map, n, replicas, seed, opt);
  return profile_from_variances(rep.block_variances, rep.boundary_variance);
}

//---------------------------------------------------------------------------//
// Scaled cumulant generating function
//---------------------------------------------------------------------------//

enum class ScgfMethod {
  path,      ///< log-mean-exp of exp(theta X_n) over replicas
  blockwise, ///< sum over blocks of log-mean-exp of exp(theta Y_k)
  exact,     ///< sum over blocks of the exact annealed block transform
};

inline std::string_view to_string(ScgfMethod m) {
  switch (m) {
    case ScgfMethod::path: return "path";
    case ScgfMethod::blockwise: return "blockwise";
    case ScgfMethod::exact: return "exact";
  }
  return "?";
}

struct ScgfTable {
  Tick n = 0;
  std::uint64_t replicas = 0;
  ScgfMethod method = ScgfMethod::blockwise;
  std::vector<double> theta;
  std::vector<double> value;
  std::vector<double> std_error;
};

struct ScgfOptions {
  double theta_max = 3.0;
  double collapse_threshold = 0.99;
  ScgfMethod method = ScgfMethod::blockwise;
  BlockLawOptions block_law;
};

namespace detail {

inline void check_theta(std::span<const double> grid, double theta_max) {
  for (double th : grid) {
    if (!(std::fabs(th) <= theta_max)) {
      throw std::invalid_argument("theta " + std::to_string(th) + " outside [-theta_max, theta_max]");
    }
  }
}

/// log of the mean of exp(theta * y) under a histogram, its delta-method
/// variance, and the largest single-replica weight share.
struct LogMeanExp {
  double value = 0.0;
  double variance = 0.0;
  double top_share = 0.0;
};

inline LogMeanExp log_mean_exp(const Histogram& h, double theta) {
  LogMeanExp out;
  const double r = static_cast<double>(h.total());
  double peak = -std::numeric_limits<double>::infinity();
  h.for_each([&](std::int64_t y, std::uint64_t) { peak = std::max(peak, theta * static_cast<double>(y)); });
  double s1 = 0.0;
  double s2 = 0.0;
  h.for_each([&](std::int64_t y, std::uint64_t c) {
    const double w = std::exp(theta * static_cast<double>(y) - peak);
    s1 += static_cast<double>(c) * w;
    s2 += static_cast<double>(c) * w * w;
  });
  out.value = peak + std::log(s1 / r);
  const double mean = s1 / r;
  const double var = std::max(0.0, s2 / r - mean * mean);
  out.variance = r > 1.0 ? var / (r * mean * mean) : 0.0;
  out.top_share = 1.0 / s1;  // the peak weight is exp(0) = 1
  return out;
}

inline Histogram histogram_of(std::span<const std::int64_t> xs, Tick n) {
  Histogram h(n);
  for (auto x : xs) h.add(x);
  return h;
}

}  // namespace detail

/// Monte-Carlo s.c.g.f. from a finished batch. `path` works on X_n alone;
/// `blockwise` uses block independence under the annealed law and needs the
/// recorded block histograms.
inline ScgfTable scgf_from_batch(const ReplicaBatch& b, std::span<const double> theta_grid,
                                 const ScgfOptions& opt = {}) {
  detail::check_theta(theta_grid, opt.theta_max);
  if (b.n == 0) throw std::invalid_argument("scgf needs n >= 1");
  ScgfTable t;
  t.n = b.n;
  t.replicas = b.replicas;
  t.method = opt.method;
  const double n = static_cast<double>(b.n);
  const Histogram path_hist =
      opt.method == ScgfMethod::path ? detail::histogram_of(b.positions, b.n) : Histogram();
  for (double th : theta_grid) {
    t.theta.push_back(th);
    if (th == 0.0) {
      t.value.push_back(0.0);
      t.std_error.push_back(0.0);
      continue;
    }
    double total = 0.0;
    double var = 0.0;
    auto absorb = [&](const Histogram& h) {
      if (h.counts.empty() || h.length == 0) return;
      const auto lme = detail::log_mean_exp(h, th);
      if (lme.top_share > opt.collapse_threshold) {
        throw EffectiveSampleCollapse("theta " + std::to_string(th) +
                                      ": one replica carries share " +
                                      std::to_string(lme.top_share) + " of the weight");
      }
      total += lme.value;
      var += lme.variance;
    };
    if (opt.method == ScgfMethod::path) {
      absorb(path_hist);
    } else {
      if (b.blocks.size() != b.schedule.lengths.size()) {
        throw std::invalid_argument("blockwise scgf needs recorded blocks");
      }
      for (const auto& h : b.blocks) absorb(h);
      absorb(b.boundary);
    }
    t.value.push_back(total / n);
    t.std_error.push_back(std::sqrt(var) / n);
  }
  return t;
}

inline ScgfTable scgf_estimate(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                               std::span<const double> theta_grid, std::uint64_t replicas,
                               std::uint64_t seed, const ScgfOptions& opt = {},
                               ReplicaOptions ropt = {}) {
  if (replicas < 2) throw BudgetTooSmall("scgf_estimate needs at least 2 replicas");
  detail::check_theta(theta_grid, opt.theta_max);
  ropt.record_blocks = opt.method == ScgfMethod::blockwise;
  const ReplicaBatch b = run_batch(law, map, n, replicas, seed, ropt);
  return scgf_from_batch(b, theta_grid, opt);
}

/// Block-product s.c.g.f. built from exact annealed single-block laws.
inline ScgfTable scgf_exact(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                            std::span<const double> theta_grid, const ScgfOptions& opt = {}) {
  detail::check_theta(theta_grid, opt.theta_max);
  if (n == 0) throw std::invalid_argument("scgf needs n >= 1");
  const BlockSchedule sch = schedule_at(map, n);
  std::map<Tick, std::uint64_t> multiplicity;
  for (Tick T : sch.lengths) ++multiplicity[T];
  if (sch.boundary > 0) ++multiplicity[sch.boundary];
  std::map<Tick, AnnealedBlockLaw> laws;
  for (const auto& [T, c] : multiplicity) laws.emplace(T, AnnealedBlockLaw(law, T, opt.block_law));
  ScgfTable t;
  t.n = n;
  t.method = ScgfMethod::exact;
  t.replicas = 0;
  for (double th : theta_grid) {
    double total = 0.0;
    double var = 0.0;
    if (th != 0.0) {
      for (const auto& [T, c] : multiplicity) {
        const auto& bl = laws.at(T);
        total += static_cast<double>(c) * bl.log_laplace(th);
        const double se = bl.log_laplace_stderr(th);
        var += static_cast<double>(c) * static_cast<double>(c) * se * se;
      }
    }
    t.theta.push_back(th);
    t.value.push_back(total / static_cast<double>(n));
    t.std_error.push_back(std::sqrt(var) / static_cast<double>(n));
  }
  return t;
}

/// Central-difference slope of the table at theta = 0 (needs 0 and its two
/// neighbours on the grid).
inline double scgf_slope_at_zero(const ScgfTable& t) {
  for (std::size_t i = 1; i + 1 < t.theta.size(); ++i) {
    if (t.theta[i] == 0.0) {
      return (t.value[i + 1] - t.value[i - 1]) / (t.theta[i + 1] - t.theta[i - 1]);
    }
  }
  throw std::invalid_argument("theta grid must contain 0 as an interior point");
}

/// Largest violation of midpoint convexity over consecutive grid triples.
inline double convexity_defect(std::span<const double> grid, std::span<const double> values) {
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double w = (grid[i] - grid[i - 1]) / (grid[i + 1] - grid[i - 1]);
    const double chord = (1.0 - w) * values[i - 1] + w * values[i + 1];
    worst = std::max(worst, values[i] - chord);
  }
  return worst;
}

//---------------------------------------------------------------------------//
// Legendre-Fenchel transform
//---------------------------------------------------------------------------//

struct RateFunctionTable {
  std::vector<double> x;
  std::vector<double> value;
  std::vector<double> theta_star;
};

/// I(x) = sup_theta (x theta - Lambda(theta)) over the grid, refined by a
/// parabola through the argmax and its neighbours.
inline RateFunctionTable legendre_transform(std::span<const double> theta,
                                            std::span<const double> lambda,
                                            std::span<const double> x_grid) {
  if (theta.size() != lambda.size() || theta.empty()) {
    throw std::invalid_argument("legendre_transform: grid and values differ in size");
  }
  for (double l : lambda) {
    if (!std::isfinite(l)) throw std::invalid_argument("legendre_transform: non-finite table");
  }
  RateFunctionTable out;
  for (double x : x_grid) {
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double v = x * theta[i] - lambda[i];
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    double th_star = theta[best];
    if (best > 0 && best + 1 < theta.size()) {
      const double t0 = theta[best - 1], t1 = theta[best], t2 = theta[best + 1];
      const double f0 = x * t0 - lambda[best - 1], f1 = best_val, f2 = x * t2 - lambda[best + 1];
      const double d01 = (f1 - f0) / (t1 - t0);
      const double d12 = (f2 - f1) / (t2 - t1);
      const double curv = (d12 - d01) / (t2 - t0);  // half the second derivative
      if (curv < 0.0) {
        const double vertex = 0.5 * (t0 + t1) - d01 / (2.0 * curv);
        if (vertex >= t0 && vertex <= t2) {
          const double refined = f1 + d01 * (vertex - t1) + curv * (vertex - t0) * (vertex - t1);
          if (refined > best_val) {
            best_val = refined;
            th_star = vertex;
          }
        }
      }
    }
    out.x.push_back(x);
    out.value.push_back(best_val);
    out.theta_star.push_back(th_star);
  }
  return out;
}

inline RateFunctionTable legendre_transform(const ScgfTable& t, std::span<const double> x_grid) {
  return legendre_transform(t.theta, t.value, x_grid);
}

//---------------------------------------------------------------------------//
// Homogenization
//---------------------------------------------------------------------------//

struct LengthWeight {
  Tick length = 0;
  double weight = 0.0;
};

struct HomogenizationSummary {
  double mean_length = 0.0;      ///< Tbar
  double speed = 0.0;            ///< v
  double block_variance = 0.0;   ///< sigma*^2
  double variance = 0.0;         ///< sigma^2 = sigma*^2 / Tbar
  std::vector<double> a_grid;
  std::vector<double> J;         ///< J*(a)
  std::vector<double> I;         ///< I*(a) = J*(a) / Tbar
  bool exact = true;

  /// J*(a) for any a, not only on the grid.
  std::function<double(double)> J_at;
};

/// Summary for a finite-support limit law nu* of block lengths.
inline HomogenizationSummary homogenization_summary(const EnvironmentLaw& law,
                                                    std::vector<LengthWeight> nu,
                                                    std::span<const double> a_grid = {},
                                                    BlockLawOptions opt = {}) {
  if (nu.empty()) throw UnboundedSupport("nu* must have a nonempty finite support");
  double mass = 0.0;
  for (const auto& lw : nu) {
    if (lw.length == kInfinite || lw.length == 0 || !(lw.weight >= 0.0) || !std::isfinite(lw.weight)) {
      throw UnboundedSupport("nu* must be supported on finite positive lengths");
    }
    mass += lw.weight;
  }
  if (std::fabs(mass - 1.0) > 1e-12) throw std::invalid_argument("nu* weights must sum to 1");

  HomogenizationSummary s;
  auto laws = std::make_shared<std::vector<std::pair<double, AnnealedBlockLaw>>>();
  double mean_dz = 0.0;
  for (const auto& lw : nu) {
    if (lw.weight == 0.0) continue;
    AnnealedBlockLaw bl(law, lw.length, opt);
    s.exact = s.exact && bl.exact();
    s.mean_length += static_cast<double>(lw.length) * lw.weight;
    mean_dz += bl.mean() * lw.weight;
    s.block_variance += bl.variance() * lw.weight;
    laws->emplace_back(lw.weight, std::move(bl));
  }
  s.speed = mean_dz / s.mean_length;
  s.variance = s.block_variance / s.mean_length;
  s.J_at = [laws](double a) {
    double acc = 0.0;
    for (const auto& [w, bl] : *laws) acc += w * bl.log_laplace(a);
    return acc;
  };
  for (double a : a_grid) {
    s.a_grid.push_back(a);
    s.J.push_back(s.J_at(a));
    s.I.push_back(s.J.back() / s.mean_length);
  }
  return s;
}

//---------------------------------------------------------------------------//
// Recurrence diagnostic
//---------------------------------------------------------------------------//

struct RecurrencePoint {
  Tick n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ratio = 0.0;     ///< |mean| / sd
  double ratio_se = 0.0;  ///< delta method
  double mean_se = 0.0;
};

inline RecurrencePoint recurrence_point(Tick n, std::span<const std::int64_t> xs) {
  const SampleMoments m = sample_moments(xs);
  RecurrencePoint p;
  p.n = n;
  p.mean = m.mean;
  p.mean_se = m.mean_se;
  p.sd = std::sqrt(m.variance);
  if (p.sd <= 0.0) return p;
  p.ratio = std::fabs(m.mean) / p.sd;
  const double r = static_cast<double>(m.count);
  const double sgn = m.mean >= 0.0 ? 1.0 : -1.0;
  const double dm = sgn / p.sd;
  const double dv = -std::fabs(m.mean) / (2.0 * p.sd * p.sd * p.sd);
  const double v = m.variance;
  const double var = dm * dm * v / r + dv * dv * (m.fourth_central - v * v) / r +
                     2.0 * dm * dv * m.third_central / r;
  p.ratio_se = std::sqrt(std::max(0.0, var));
  return p;
}

inline std::vector<RecurrencePoint> recurrence_diagnostic(const EnvironmentLaw& law,
                                                          const ResamplingMap& map,
                                                          std::vector<Tick> n_list,
                                                          std::uint64_t replicas,
                                                          std::uint64_t seed,
                                                          ReplicaOptions opt = {}) {
  if (replicas < 2) throw BudgetTooSmall("recurrence_diagnostic needs at least 2 replicas");
  if (n_list.empty()) return {};
  for (Tick n : n_list) {
    if (n < 1) throw std::invalid_argument("horizons must be >= 1");
  }
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  opt.checkpoints = n_list;
  opt.record_blocks = false;
  const ReplicaBatch b = run_batch(law, map, n_list.back(), replicas, seed, opt);
  std::vector<RecurrencePoint> out;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    out.push_back(recurrence_point(n_list[i], b.checkpoint_positions[i]));
  }
  return out;
}

//---------------------------------------------------------------------------//
// Gradual sums
//---------------------------------------------------------------------------//

/// E[S_t] = sum_k (m_{k,t} / t) v(k, m_{k,t}) with k 1-based.
inline long double gradual_sum_expected(std::span<const Wide> masses,
                                        const std::function<long double(std::uint64_t, Wide)>& v,
                                        Wide t) {
  if (t < 1) throw std::invalid_argument("gradual_sum_expected needs t >= 1");
  const auto pieces = truncated_pieces(masses, t);
  long double acc = 0.0L;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (pieces[k] == 0) continue;
    acc += static_cast<long double>(pieces[k]) * v(k + 1, pieces[k]);
  }
  return acc / static_cast<long double>(t);
}

struct SignedRatio {
  Int128 num = 0;
  Wide den = 1;
  long double value() const {
    return static_cast<long double>(num) / static_cast<long double>(den);
  }
};

/// Exact version for integer-valued v: returns the fraction sum m_{k,t} v / t.
inline SignedRatio gradual_sum_expected_exact(std::span<const Wide> masses,
                                              const std::function<std::int64_t(std::uint64_t, Wide)>& v,
                                              Wide t) {
  if (t < 1) throw std::invalid_argument("gradual_sum_expected needs t >= 1");
  const auto pieces = truncated_pieces(masses, t);
  SignedRatio r;
  r.den = t;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    r.num += static_cast<Int128>(pieces[k]) * v(k + 1, pieces[k]);
  }
  return r;
}

//---------------------------------------------------------------------------//
// Distribution distances
//---------------------------------------------------------------------------//

enum class DistanceKind { ks, wasserstein1 };

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("samples must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw std::invalid_argument("samples must be nonempty");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Empirical W1 distance: integral of |F_a - F_b|.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("samples must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double acc = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    acc += std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (x - prev);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    prev = x;
  }
  return acc;
}

inline double distribution_distance(std::vector<double> a, std::vector<double> b, DistanceKind kind) {
  return kind == DistanceKind::ks ? ks_two_sample(std::move(a), std::move(b))
                                  : wasserstein1(std::move(a), std::move(b));
}

inline double distribution_distance(std::vector<double> a, const std::function<double(double)>& cdf) {
  return ks_one_sample(std::move(a), cdf);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// (x - mean) / sd with the sample's own moments.
inline std::vector<double> standardize(std::span<const std::int64_t> xs) {
  const SampleMoments m = sample_moments(xs);
  const double sd = std::sqrt(m.variance);
  std::vector<double> out;
  out.reserve(xs.size());
  for (auto x : xs) out.push_back((static_cast<double>(x) - m.mean) / sd);
  return out;
}

//---------------------------------------------------------------------------//
// Point masses and the uniform-ellipticity shift inequality
//---------------------------------------------------------------------------//

/// Exact P(X_t = x) for t = 0..n of a homogeneous walk; row t is indexed by
/// x + n.
inline std::vector<std::vector<double>> homogeneous_point_masses(double p, Tick n) {
  const auto width = static_cast<std::size_t>(2 * n + 1);
  const auto centre = static_cast<std::int64_t>(n);
  std::vector<std::vector<double>> rows(n + 1, std::vector<double>(width, 0.0));
  rows[0][static_cast<std::size_t>(centre)] = 1.0;
  for (Tick t = 1; t <= n; ++t) {
    for (std::int64_t x = -static_cast<std::int64_t>(t); x <= static_cast<std::int64_t>(t); ++x) {
      const auto i = static_cast<std::size_t>(x + centre);
      double v = 0.0;
      if (x - 1 >= -centre) v += p * rows[t - 1][i - 1];
      if (x + 1 <= centre) v += (1.0 - p) * rows[t - 1][i + 1];
      rows[t][i] = v;
    }
  }
  return rows;
}

struct ShiftCheck {
  std::uint64_t pairs = 0;
  /// min over pairs of log P(X_{n-m} = x) - log P(X_n = x') - m log c.
  double upper_slack = std::numeric_limits<double>::infinity();
  /// min over pairs of log P(X_n = x') - log P(X_{n-m} = x) - m log c, the
  /// direct Chapman-Kolmogorov lower bound.
  double lower_slack = std::numeric_limits<double>::infinity();
  /// Pair attaining upper_slack.
  Tick worst_n = 0;
  std::int64_t worst_x_prime = 0;
  std::int64_t worst_x = 0;
};

/// Enumerates every t <= n_max, x' reachable at t, x reachable at t - m with
/// m = |x - x'| >= 1.
inline ShiftCheck shift_inequality_check(double p, double c, Tick n_max) {
  const auto rows = homogeneous_point_masses(p, n_max);
  const auto centre = static_cast<std::int64_t>(n_max);
  ShiftCheck out;
  const double logc = std::log(c);
  for (Tick t = 1; t <= n_max; ++t) {
    for (std::int64_t xp = -centre; xp <= centre; ++xp) {
      const double pn = rows[t][static_cast<std::size_t>(xp + centre)];
      if (pn <= 0.0) continue;
      for (std::int64_t x = -centre; x <= centre; ++x) {
        const auto m = static_cast<Tick>(std::llabs(x - xp));
        if (m == 0 || m > t) continue;
        const double pm = rows[t - m][static_cast<std::size_t>(x + centre)];
        if (pm <= 0.0) continue;
        ++out.pairs;
        const double diff = std::log(pm) - std::log(pn);
        const double md = static_cast<double>(m);
        if (diff - md * logc < out.upper_slack) {
          out.upper_slack = diff - md * logc;
          out.worst_n = t;
          out.worst_x_prime = xp;
          out.worst_x = x;
        }
        out.lower_slack = std::min(out.lower_slack, -diff - md * logc);
      }
    }
  }
  return out;
}

}  // namespace rwcre

#endif  // RWCRE_ESTIMATORS_HPP
