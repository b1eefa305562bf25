#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace h3t {

/// SplitMix64 generator. Cheap to construct, so every (seed, step, node)
/// combination can own an independent stream, and the output sequence is
/// identical on every platform (unlike the std distributions).
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream from a seed and a list of keys.
Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Uniform double in [lo, hi).
double uniform(Rng& rng, double lo, double hi);

/// Standard normal draw (Box-Muller).
double normal(Rng& rng);

std::uint64_t mix64(std::uint64_t x);

}  // namespace h3t
