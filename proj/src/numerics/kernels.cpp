#include "taksie/numerics/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace taksie::num::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("TAKSIE_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
  }
  return best_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  if (isa == Isa::scalar) return true;
  static const bool avx2_ok = avx2::compiled() && cpu_has_avx2_fma();
  return avx2_ok;
}

Isa best_isa() { return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel variant not available: " + std::string(isa_name(isa)));
  }
  active().store(isa, std::memory_order_relaxed);
}

void gemm(Isa isa, std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  if (isa == Isa::avx2) {
    avx2::gemm(m, n, k, a, lda, b, ldb, c, ldc);
  } else {
    scalar::gemm(m, n, k, a, lda, b, ldb, c, ldc);
  }
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  gemm(active_isa(), m, n, k, a, lda, b, ldb, c, ldc);
}

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = r0 + kTile < rows ? r0 + kTile : rows;
      const std::size_t c1 = c0 + kTile < cols ? c0 + kTile : cols;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

namespace scalar {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace scalar

#if !TAKSIE_HAVE_AVX2
namespace avx2 {
bool compiled() { return false; }
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  scalar::gemm(m, n, k, a, lda, b, ldb, c, ldc);
}
}  // namespace avx2
#endif

}  // namespace taksie::num::kernels
