#pragma once

#include <cstdint>
#include <vector>

namespace lsc {

// Deterministic xoshiro256** stream with splitmix64 seeding.
// Identical seeds give identical draw sequences on every platform; no
// std::random distribution is used anywhere (their outputs are
// implementation-defined).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 significant bits.
  double uniform01();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via the Marsaglia polar method (rejection, deterministic).
  double normal();
  double normal(double mean, double stddev);

  // Normal resampled until the draw is strictly positive.
  double truncated_positive_normal(double mean, double stddev);

  // Unbiased integer in [0, n) by rejection. n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  // In-place Fisher-Yates.
  void shuffle(std::vector<double>& values);

  std::vector<std::size_t> permutation(std::size_t n);

  // Independent child stream addressed by tag; children of equal tags match.
  RandomSource child(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lsc
