#include "taksie/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace taksie::num {

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below requires n > 0");
  const auto wide = static_cast<unsigned __int128>(engine_()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

long Rng::between(long lo, long hi) {
  if (hi < lo) throw std::invalid_argument("Rng::between requires lo <= hi");
  return lo + static_cast<long>(below(static_cast<std::size_t>(hi - lo) + 1));
}

Tensor Rng::draw(Distribution kind, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = kind == Distribution::uniform ? uniform() : normal();
  return t;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(mix64(base) ^ (stream * 0xd1b54a32d192ed03ULL));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return mix64(derive_seed(base, stream) ^ (index * 0x8cb92ba72f3d8dd7ULL));
}

}  // namespace taksie::num
