#ifndef RWCRE_BLOCK_LAW_HPP
#define RWCRE_BLOCK_LAW_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rwcre/environment.hpp"
#include "rwcre/resampling.hpp"
#include "rwcre/rng.hpp"

namespace rwcre {

/// Quenched law of Z_T for a walk started at 0 in a fixed environment given
/// on the sites [-(T-1), T-1]. Exact forward recursion, O(T^2).
///
/// `omega(x)` is indexed by x + (T - 1). Result index is (z + T).
inline std::vector<double> quenched_distribution(std::span<const double> omega, Tick T) {
  const auto width = static_cast<std::size_t>(2 * T + 1);
  std::vector<double> cur(width, 0.0);
  std::vector<double> next(width, 0.0);
  const auto centre = static_cast<std::int64_t>(T);
  cur[static_cast<std::size_t>(centre)] = 1.0;
  for (Tick t = 0; t < T; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    const auto reach = static_cast<std::int64_t>(t);
    for (std::int64_t z = -reach; z <= reach; z += 2) {
      const double p = cur[static_cast<std::size_t>(z + centre)];
      if (p == 0.0) continue;
      const double w = omega[static_cast<std::size_t>(z + centre - 1)];
      next[static_cast<std::size_t>(z + 1 + centre)] += p * w;
      next[static_cast<std::size_t>(z - 1 + centre)] += p * (1.0 - w);
    }
    cur.swap(next);
  }
  return cur;
}

struct BlockLawOptions {
  /// Enumerate all environments on the 2T-1 relevant sites when there are at
  /// most this many; otherwise sample `environments` of them.
  std::uint64_t max_enumeration = 4096;
  std::uint64_t environments = 256;
  std::uint64_t seed = 0x5EED;
};

/// Annealed law of a single block Z_T: the average over environments of the
/// exact quenched distribution. Exact when the environments could be
/// enumerated, a Monte-Carlo mixture of `components` exact laws otherwise.
class AnnealedBlockLaw {
 public:
  AnnealedBlockLaw(const EnvironmentLaw& law, Tick T, BlockLawOptions opt = {}) : T_(T) {
    const auto width = static_cast<std::size_t>(2 * T + 1);
    probs_.assign(width, 0.0);
    if (T == 0) {
      probs_[0] = 1.0;
      exact_ = true;
      return;
    }
    const auto sites = static_cast<std::size_t>(2 * T - 1);
    std::vector<double> omega(sites, 0.5);
    if (law.kind() == LawKind::finite_support) {
      const auto& atoms = law.atoms();
      const double log_count = static_cast<double>(sites) * std::log(static_cast<double>(atoms.size()));
      if (log_count <= std::log(static_cast<double>(opt.max_enumeration)) + 1e-9) {
        enumerate(atoms, omega);
        exact_ = true;
        return;
      }
    }
    Stream master(derive_key(opt.seed, "block-law", T));
    components_.reserve(opt.environments);
    for (std::uint64_t r = 0; r < opt.environments; ++r) {
      Stream env = master.split("environment", r);
      for (auto& w : omega) w = law.sample(env);
      auto q = quenched_distribution(omega, T);
      for (std::size_t i = 0; i < width; ++i) probs_[i] += q[i];
      components_.push_back(std::move(q));
    }
    for (auto& p : probs_) p /= static_cast<double>(opt.environments);
  }

  Tick length() const noexcept { return T_; }
  bool exact() const noexcept { return exact_; }
  std::size_t environments() const noexcept { return components_.size(); }

  /// P(Z_T = z).
  double probability(std::int64_t z) const {
    const std::int64_t idx = z + static_cast<std::int64_t>(T_);
    if (idx < 0 || idx >= static_cast<std::int64_t>(probs_.size())) return 0.0;
    return probs_[static_cast<std::size_t>(idx)];
  }

  std::span<const double> probabilities() const noexcept { return probs_; }

  double mean() const { return moment_of(probs_, 1); }

  double variance() const {
    const double m = mean();
    double acc = 0.0;
    for_each_support(probs_, [&](double z, double p) { acc += p * (z - m) * (z - m); });
    return acc;
  }

  /// log E[exp(a Z_T)], evaluated with a max shift.
  double log_laplace(double a) const { return log_laplace_of(probs_, a); }

  /// Standard error of exp(log_laplace(a)) relative to its value, from the
  /// spread of the sampled environments (0 when exact).
  double log_laplace_stderr(double a) const {
    if (exact_ || components_.size() < 2) return 0.0;
    const double centre = log_laplace(a);
    std::vector<double> ratios;
    ratios.reserve(components_.size());
    for (const auto& c : components_) ratios.push_back(std::exp(log_laplace_of(c, a) - centre));
    double m = 0.0;
    for (double r : ratios) m += r;
    m /= static_cast<double>(ratios.size());
    double v = 0.0;
    for (double r : ratios) v += (r - m) * (r - m);
    v /= static_cast<double>(ratios.size() - 1);
    return std::sqrt(v / static_cast<double>(ratios.size())) / m;
  }

 private:
  template <class F>
  void for_each_support(const std::vector<double>& probs, F&& f) const {
    const auto T = static_cast<std::int64_t>(T_);
    for (std::int64_t z = -T; z <= T; z += 2) {
      const double p = probs[static_cast<std::size_t>(z + T)];
      if (p > 0.0) f(static_cast<double>(z), p);
    }
  }

  double moment_of(const std::vector<double>& probs, int k) const {
    double acc = 0.0;
    for_each_support(probs, [&](double z, double p) { acc += p * std::pow(z, k); });
    return acc;
  }

  double log_laplace_of(const std::vector<double>& probs, double a) const {
    double peak = -std::numeric_limits<double>::infinity();
    for_each_support(probs, [&](double z, double p) { peak = std::max(peak, a * z + std::log(p)); });
    double acc = 0.0;
    for_each_support(probs, [&](double z, double p) { acc += std::exp(a * z + std::log(p) - peak); });
    return peak + std::log(acc);
  }

  void enumerate(const std::vector<Atom>& atoms, std::vector<double>& omega) {
    const std::size_t sites = omega.size();
    std::vector<std::size_t> digits(sites, 0);
    for (;;) {
      double weight = 1.0;
      for (std::size_t i = 0; i < sites; ++i) {
        omega[i] = atoms[digits[i]].omega;
        weight *= atoms[digits[i]].weight;
      }
      const auto q = quenched_distribution(omega, T_);
      for (std::size_t i = 0; i < q.size(); ++i) probs_[i] += weight * q[i];
      std::size_t pos = 0;
      while (pos < sites && ++digits[pos] == atoms.size()) digits[pos++] = 0;
      if (pos == sites) break;
    }
  }

  Tick T_;
  bool exact_ = false;
  std::vector<double> probs_;
  std::vector<std::vector<double>> components_;
};

/// Exact law of a homogeneous walk with right-probability p after n steps,
/// index z + n.
inline std::vector<double> homogeneous_distribution(double p, Tick n) {
  std::vector<double> omega(n == 0 ? 0 : static_cast<std::size_t>(2 * n - 1), p);
  return quenched_distribution(omega, n);
}

}  // namespace rwcre

#endif  // RWCRE_BLOCK_LAW_HPP
