#ifndef RWCRE_RNG_HPP
#define RWCRE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace rwcre {

//---------------------------------------------------------------------------//
// Counter-based random streams.
//
// Every stream is identified by a 64-bit key. The i-th output of a stream is
// mix64(key + (i + 1) * golden), i.e. SplitMix64 started at `key`. Keys for
// sub-streams are obtained by hashing (parent key, label, index), so any
// replica, environment generation or lattice site can address its own stream
// without touching shared state. This is what makes results independent of
// how replicas are scheduled over workers.
//---------------------------------------------------------------------------//

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a, used to turn textual stream labels into 64-bit constants.
constexpr std::uint64_t label_hash(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Key of the sub-stream `index` of `parent` tagged with `label`.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t label,
                                   std::uint64_t index = 0) noexcept {
  std::uint64_t h = mix64(parent ^ mix64(label + kGolden));
  return mix64(h + mix64(index ^ 0x2545F4914F6CDD1DULL));
}

constexpr std::uint64_t derive_key(std::uint64_t parent, std::string_view label,
                                   std::uint64_t index = 0) noexcept {
  return derive_key(parent, label_hash(label), index);
}

/// Maps a signed lattice site onto an unsigned index without collisions.
constexpr std::uint64_t zigzag(std::int64_t x) noexcept {
  return (static_cast<std::uint64_t>(x) << 1) ^ static_cast<std::uint64_t>(x >> 63);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Uniform double in the open interval (0, 1).
constexpr double to_open_unit(std::uint64_t x) noexcept {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

/// A counter-based stream; satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key), counter_(0) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Independent child stream; does not advance this one.
  constexpr Stream split(std::string_view label, std::uint64_t index = 0) const noexcept {
    return Stream(derive_key(key_, label, index));
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

  /// Jump to an absolute position in the stream.
  constexpr void seek(std::uint64_t position) noexcept { counter_ = position; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// The samplers below consume raw bits directly so that results are the same
// on every standard library implementation.

template <class Rng>
double uniform01(Rng& rng) {
  return to_unit(rng());
}

template <class Rng>
double open_uniform01(Rng& rng) {
  return to_open_unit(rng());
}

template <class Rng>
double standard_exponential(Rng& rng) {
  return -std::log(open_uniform01(rng));
}

/// Box-Muller; consumes exactly two outputs per call.
template <class Rng>
double standard_normal(Rng& rng) {
  const double u1 = open_uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Poisson variate; inversion for small means, PTRS otherwise.
template <class Rng>
std::uint64_t poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 30.0) {
    double p = std::exp(-mean);
    double cdf = p;
    const double u = uniform01(rng);
    std::uint64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && cdf < u) break;
    }
    return k;
  }
  // Hormann (1993), transformed rejection with squeeze.
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform01(rng) - 0.5;
    const double v = uniform01(rng);
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

}  // namespace rwcre

#endif  // RWCRE_RNG_HPP
