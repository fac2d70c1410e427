#include "lsc/rng.hpp"

#include <cmath>

#include "lsc/errors.hpp"

namespace lsc {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t RandomSource::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomSource::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) {
  if (!(lo < hi)) throw DomainError("uniform: lo must be < hi");
  return lo + (hi - lo) * uniform01();
}

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

double RandomSource::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

double RandomSource::truncated_positive_normal(double mean, double stddev) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double draw = normal(mean, stddev);
    if (draw > 0.0) return draw;
  }
  throw NumericalError("truncated_positive_normal: no positive draw", 100000);
}

std::uint64_t RandomSource::next_below(std::uint64_t n) {
  if (n == 0) throw DomainError("next_below: n must be positive");
  const std::uint64_t threshold = (0ULL - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

void RandomSource::shuffle(std::vector<double>& values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

std::vector<std::size_t> RandomSource::permutation(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next_below(i));
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

RandomSource RandomSource::child(std::uint64_t tag) const {
  std::uint64_t sm = seed_ ^ (0x9e3779b97f4a7c15ULL + tag * 0xd1342543de82ef95ULL);
  return RandomSource(splitmix64(sm));
}

}  // namespace lsc
