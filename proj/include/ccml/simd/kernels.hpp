#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation; vectorized variants (AVX2+FMA on x86-64, NEON on AArch64)
// are compiled into separate translation units and chosen once at startup
// from the CPU's reported features. Set CCML_ISA=scalar to force the
// reference path.

#include <cstddef>
#include <string_view>

namespace ccml::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

enum class Trans : bool { No = false, Yes = true };

/// C[M,N] = A'[M,K] * B'[K,N] (+ C if accumulate), row-major, where A' is A
/// or A^T and B' is B or B^T. lda/ldb/ldc are row strides of the stored
/// matrices.
using GemmFn = void (*)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        const float* a, std::size_t lda, const float* b, std::size_t ldb,
                        float* c, std::size_t ldc, bool accumulate);

struct KernelTable {
  Isa isa;
  GemmFn sgemm;
  /// y[i] += alpha * x[i]
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  /// y[i] += x[i]
  void (*add)(std::size_t n, const float* x, float* y);
  /// y[i] = max(x[i], 0)
  void (*relu)(std::size_t n, const float* x, float* y);
  /// dx[i] += x[i] > 0 ? dy[i] : 0
  void (*relu_backward)(std::size_t n, const float* x, const float* dy, float* dx);
  /// out[i] = re[i]^2 + im[i]^2 over interleaved (re, im) pairs.
  void (*complex_power)(std::size_t n_bins, const float* interleaved, float* out);
  /// Sum of x[i] * y[i], accumulated in double.
  double (*dot)(std::size_t n, const float* x, const float* y);
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

/// The table in use. Resolved on first call; `force_isa` overrides it.
const KernelTable& kernels() noexcept;

/// Returns false (and leaves the selection unchanged) if `isa` is unavailable.
bool force_isa(Isa isa) noexcept;

/// Double-precision reference GEMM with the same contract as `sgemm`. Used
/// by the 64-bit build of the tensor ops (gradient checking).
void dgemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
           std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
           bool accumulate);

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

template <>
inline void gemm<float>(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        const float* a, std::size_t lda, const float* b, std::size_t ldb,
                        float* c, std::size_t ldc, bool accumulate) {
  kernels().sgemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <>
inline void gemm<double>(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                         const double* a, std::size_t lda, const double* b, std::size_t ldb,
                         double* c, std::size_t ldc, bool accumulate) {
  dgemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace ccml::simd
