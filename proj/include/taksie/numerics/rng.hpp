#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "taksie/numerics/tensor.hpp"

namespace taksie::num {

enum class Distribution { uniform, standard_normal };

// Seeded stream. The engine is std::mt19937_64 (bit-exact across standard
// libraries); the conversions to doubles are implemented here so they do not
// depend on library-specific distribution classes.
//
//   uniform: top 53 bits of one engine word, scaled by 2^-53, so u in [0, 1).
//   normal:  Box-Muller on two uniforms, r = sqrt(-2 ln(1 - u1)),
//            z0 = r cos(2 pi u2), z1 = r sin(2 pi u2); z1 is cached.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);
  // Integer in [lo, hi], inclusive.
  long between(long lo, long hi);
  bool bernoulli(double p) { return uniform() < p; }

  Tensor draw(Distribution kind, std::vector<std::size_t> shape);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

}  // namespace taksie::num
