#include <algorithm>

#include "ccml/simd/kernels.hpp"

namespace ccml::simd {
namespace {

// Plain triple loop; the i-p-j order keeps the inner loop contiguous for the
// common non-transposed B.
template <typename T>
void reference_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
                    std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, T{0});
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ta == Trans::Yes ? a[p * lda + i] : a[i * lda + p];
      if (tb == Trans::No) {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * ldb + p];
      }
    }
  }
}

void sgemm_scalar(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                  const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
                  std::size_t ldc, bool accumulate) {
  reference_gemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(std::size_t n, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void relu_scalar(std::size_t n, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(std::size_t n, const float* x, const float* dy, float* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
}

void complex_power_scalar(std::size_t n_bins, const float* z, float* out) {
  for (std::size_t i = 0; i < n_bins; ++i) {
    const float re = z[2 * i];
    const float im = z[2 * i + 1];
    out[i] = re * re + im * im;
  }
}

double dot_scalar(std::size_t n, const float* x, const float* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return acc;
}

constexpr KernelTable kScalar{
    Isa::Scalar, sgemm_scalar,          axpy_scalar, add_scalar, relu_scalar,
    relu_backward_scalar, complex_power_scalar, dot_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

void dgemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
           std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
           bool accumulate) {
  reference_gemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace ccml::simd
