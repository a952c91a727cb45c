// Built with -mavx2 -mfma; only reached after the runtime CPU check.

#include <immintrin.h>

#include "ccml/simd/kernels.hpp"
#include "gemm_blocked.hpp"

namespace ccml::simd {
namespace {

struct Avx2Micro {
  static constexpr std::size_t MR = 6;
  static constexpr std::size_t NR = 16;

  static void run(std::size_t kc, const float* pa, const float* pb, float* c, std::size_t ldc,
                  bool accumulate) {
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
    __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
    __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();
    for (std::size_t p = 0; p < kc; ++p) {
      const __m256 b0 = _mm256_loadu_ps(pb);
      const __m256 b1 = _mm256_loadu_ps(pb + 8);
      __m256 av = _mm256_broadcast_ss(pa + 0);
      c00 = _mm256_fmadd_ps(av, b0, c00);
      c01 = _mm256_fmadd_ps(av, b1, c01);
      av = _mm256_broadcast_ss(pa + 1);
      c10 = _mm256_fmadd_ps(av, b0, c10);
      c11 = _mm256_fmadd_ps(av, b1, c11);
      av = _mm256_broadcast_ss(pa + 2);
      c20 = _mm256_fmadd_ps(av, b0, c20);
      c21 = _mm256_fmadd_ps(av, b1, c21);
      av = _mm256_broadcast_ss(pa + 3);
      c30 = _mm256_fmadd_ps(av, b0, c30);
      c31 = _mm256_fmadd_ps(av, b1, c31);
      av = _mm256_broadcast_ss(pa + 4);
      c40 = _mm256_fmadd_ps(av, b0, c40);
      c41 = _mm256_fmadd_ps(av, b1, c41);
      av = _mm256_broadcast_ss(pa + 5);
      c50 = _mm256_fmadd_ps(av, b0, c50);
      c51 = _mm256_fmadd_ps(av, b1, c51);
      pa += MR;
      pb += NR;
    }
    store_row(c + 0 * ldc, c00, c01, accumulate);
    store_row(c + 1 * ldc, c10, c11, accumulate);
    store_row(c + 2 * ldc, c20, c21, accumulate);
    store_row(c + 3 * ldc, c30, c31, accumulate);
    store_row(c + 4 * ldc, c40, c41, accumulate);
    store_row(c + 5 * ldc, c50, c51, accumulate);
  }

  static void store_row(float* c, __m256 lo, __m256 hi, bool accumulate) {
    if (accumulate) {
      lo = _mm256_add_ps(_mm256_loadu_ps(c), lo);
      hi = _mm256_add_ps(_mm256_loadu_ps(c + 8), hi);
    }
    _mm256_storeu_ps(c, lo);
    _mm256_storeu_ps(c + 8, hi);
  }
};

void sgemm_avx2(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const float* a,
                std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
                bool accumulate) {
  blocked_gemm<Avx2Micro>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

// The element-wise kernels avoid FMA so they stay bit-identical to the
// scalar reference.
void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void relu_avx2(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    // Select rather than max so NaN and -0 follow the scalar `x > 0 ? x : 0`.
    const __m256 keep = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_and_ps(keep, v));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(std::size_t n, const float* x, const float* dy, float* dx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(keep, _mm256_loadu_ps(dy + i));
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), g));
  }
  for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
}

void complex_power_avx2(std::size_t n_bins, const float* z, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n_bins; i += 8) {
    const __m256 lo = _mm256_loadu_ps(z + 2 * i);      // bins i..i+3
    const __m256 hi = _mm256_loadu_ps(z + 2 * i + 8);  // bins i+4..i+7
    const __m256 sq_lo = _mm256_mul_ps(lo, lo);
    const __m256 sq_hi = _mm256_mul_ps(hi, hi);
    // hadd yields [lo01 lo23 hi01 hi23 | lo45 lo67 hi45 hi67]; restore order.
    const __m256 sums = _mm256_hadd_ps(sq_lo, sq_hi);
    const __m256 ordered =
        _mm256_castpd_ps(_mm256_permute4x64_pd(_mm256_castps_pd(sums), 0xD8));
    _mm256_storeu_ps(out + i, ordered);
  }
  for (; i < n_bins; ++i) {
    const float re = z[2 * i];
    const float im = z[2 * i + 1];
    out[i] = re * re + im * im;
  }
}

double dot_avx2(std::size_t n, const float* x, const float* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 vy = _mm256_loadu_ps(y + i);
    const __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(vx));
    const __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(vx, 1));
    const __m256d y0 = _mm256_cvtps_pd(_mm256_castps256_ps128(vy));
    const __m256d y1 = _mm256_cvtps_pd(_mm256_extractf128_ps(vy, 1));
    acc0 = _mm256_fmadd_pd(x0, y0, acc0);
    acc1 = _mm256_fmadd_pd(x1, y1, acc1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return acc;
}

constexpr KernelTable kAvx2{
    Isa::Avx2,          sgemm_avx2,         axpy_avx2, add_avx2, relu_avx2,
    relu_backward_avx2, complex_power_avx2, dot_avx2,
};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace ccml::simd
