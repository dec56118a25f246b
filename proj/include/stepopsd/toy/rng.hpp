#pragma once

#include <cstdint>
#include <random>

namespace stepopsd::toy {

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive combination of stream keys into one 64-bit seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

// Portable random stream: mt19937_64 bits with hand-rolled conversions, so the
// same seed yields the same doubles on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via Box-Muller (one draw per call, the pair's second
  // value is cached).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stepopsd::toy
