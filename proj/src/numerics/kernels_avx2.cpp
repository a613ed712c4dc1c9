// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "taksie/numerics/kernels.hpp"

namespace taksie::num::kernels::avx2 {
namespace {

// 4 rows x 8 columns of C held in eight registers across the whole k loop.
inline void block_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                      std::size_t ldb, double* c, std::size_t ldc) {
  double* c0 = c;
  double* c1 = c + ldc;
  double* c2 = c + 2 * ldc;
  double* c3 = c + 3 * ldc;
  __m256d c00 = _mm256_loadu_pd(c0), c01 = _mm256_loadu_pd(c0 + 4);
  __m256d c10 = _mm256_loadu_pd(c1), c11 = _mm256_loadu_pd(c1 + 4);
  __m256d c20 = _mm256_loadu_pd(c2), c21 = _mm256_loadu_pd(c2 + 4);
  __m256d c30 = _mm256_loadu_pd(c3), c31 = _mm256_loadu_pd(c3 + 4);
  const double* a0 = a;
  const double* a1 = a + lda;
  const double* a2 = a + 2 * lda;
  const double* a3 = a + 3 * lda;
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av = _mm256_broadcast_sd(a0 + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a1 + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a2 + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a3 + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c0, c00);
  _mm256_storeu_pd(c0 + 4, c01);
  _mm256_storeu_pd(c1, c10);
  _mm256_storeu_pd(c1 + 4, c11);
  _mm256_storeu_pd(c2, c20);
  _mm256_storeu_pd(c2 + 4, c21);
  _mm256_storeu_pd(c3, c30);
  _mm256_storeu_pd(c3 + 4, c31);
}

inline void block_1x8(std::size_t k, const double* a, const double* b, std::size_t ldb, double* c) {
  __m256d c0 = _mm256_loadu_pd(c), c1 = _mm256_loadu_pd(c + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * ldb;
    const __m256d av = _mm256_broadcast_sd(a + p);
    c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), c0);
    c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), c1);
  }
  _mm256_storeu_pd(c, c0);
  _mm256_storeu_pd(c + 4, c1);
}

inline void block_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb, double* c) {
  __m256d c0 = _mm256_loadu_pd(c);
  for (std::size_t p = 0; p < k; ++p) {
    c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), c0);
  }
  _mm256_storeu_pd(c, c0);
}

}  // namespace

bool compiled() { return true; }

namespace {

void gemm_direct(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) block_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    for (; i < m; ++i) block_1x8(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
  for (; j + 4 <= n; j += 4) {
    for (std::size_t i = 0; i < m; ++i) block_1x4(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
  for (; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = c[i * ldc + j];
      const double* arow = a + i * lda;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(arow[p], b[p * ldb + j], acc);
      c[i * ldc + j] = acc;
    }
  }
}

}  // namespace

// Tall products repack B into contiguous kc x 8 panels and walk k in blocks;
// C is reloaded between blocks, so each element still sums p = 0..k-1 in order.
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  if (m < 16 || n < 8) {
    gemm_direct(m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
  constexpr std::size_t kc = 128;
  alignas(32) static thread_local double panel[kc * 8];
  const std::size_t n8 = n / 8 * 8;
  for (std::size_t p0 = 0; p0 < k; p0 += kc) {
    const std::size_t kb = std::min(kc, k - p0);
    const double* ap = a + p0;
    for (std::size_t j = 0; j < n8; j += 8) {
      for (std::size_t p = 0; p < kb; ++p) {
        _mm256_store_pd(panel + p * 8, _mm256_loadu_pd(b + (p0 + p) * ldb + j));
        _mm256_store_pd(panel + p * 8 + 4, _mm256_loadu_pd(b + (p0 + p) * ldb + j + 4));
      }
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) block_4x8(kb, ap + i * lda, lda, panel, 8, c + i * ldc + j, ldc);
      for (; i < m; ++i) block_1x8(kb, ap + i * lda, panel, 8, c + i * ldc + j);
    }
  }
  if (n8 < n) gemm_direct(m, n - n8, k, a, lda, b + n8, ldb, c + n8, ldc);
}

}  // namespace taksie::num::kernels::avx2
