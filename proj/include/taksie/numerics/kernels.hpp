#pragma once

// Dense inner-loop kernels. Each kernel has a portable scalar reference and,
// on x86-64, an AVX2+FMA variant chosen at runtime.
//
// All GEMM variants accumulate every output element in the same order
// (k = 0, 1, ..., K-1, starting from the existing C value). Consequently a
// row of C depends only on the matching row of A, never on how many rows are
// processed together; batched inference is bitwise equal to per-row calls
// under the same ISA. The scalar path rounds after every multiply and add,
// the AVX2 path fuses them, so the two agree only up to rounding.

#include <cstddef>
#include <string_view>

namespace taksie::num::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// Whether the variant was compiled in and the CPU supports it.
bool isa_available(Isa isa);
Isa best_isa();

// Process-wide active variant. Initialized from the TAKSIE_ISA environment
// variable ("scalar" or "avx2") when set, otherwise best_isa().
Isa active_isa();
void set_active_isa(Isa isa);

// C[m x n] += A[m x k] * B[k x n], all row-major with leading dimensions.
void gemm(Isa isa, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc);

// dst[c x r] = transpose(src[r x c]).
void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst);

namespace scalar {
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc);
}

namespace avx2 {
bool compiled();
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc);
}

}  // namespace taksie::num::kernels
