// AArch64 Advanced SIMD variants.

#include <arm_neon.h>

#include "ccml/simd/kernels.hpp"
#include "gemm_blocked.hpp"

namespace ccml::simd {
namespace {

struct NeonMicro {
  static constexpr std::size_t MR = 8;
  static constexpr std::size_t NR = 8;

  static void run(std::size_t kc, const float* pa, const float* pb, float* c, std::size_t ldc,
                  bool accumulate) {
    float32x4_t acc[MR][2];
    for (std::size_t r = 0; r < MR; ++r) {
      acc[r][0] = vdupq_n_f32(0.0f);
      acc[r][1] = vdupq_n_f32(0.0f);
    }
    for (std::size_t p = 0; p < kc; ++p) {
      const float32x4_t b0 = vld1q_f32(pb);
      const float32x4_t b1 = vld1q_f32(pb + 4);
      const float32x4_t a0 = vld1q_f32(pa);
      const float32x4_t a1 = vld1q_f32(pa + 4);
      acc[0][0] = vfmaq_laneq_f32(acc[0][0], b0, a0, 0);
      acc[0][1] = vfmaq_laneq_f32(acc[0][1], b1, a0, 0);
      acc[1][0] = vfmaq_laneq_f32(acc[1][0], b0, a0, 1);
      acc[1][1] = vfmaq_laneq_f32(acc[1][1], b1, a0, 1);
      acc[2][0] = vfmaq_laneq_f32(acc[2][0], b0, a0, 2);
      acc[2][1] = vfmaq_laneq_f32(acc[2][1], b1, a0, 2);
      acc[3][0] = vfmaq_laneq_f32(acc[3][0], b0, a0, 3);
      acc[3][1] = vfmaq_laneq_f32(acc[3][1], b1, a0, 3);
      acc[4][0] = vfmaq_laneq_f32(acc[4][0], b0, a1, 0);
      acc[4][1] = vfmaq_laneq_f32(acc[4][1], b1, a1, 0);
      acc[5][0] = vfmaq_laneq_f32(acc[5][0], b0, a1, 1);
      acc[5][1] = vfmaq_laneq_f32(acc[5][1], b1, a1, 1);
      acc[6][0] = vfmaq_laneq_f32(acc[6][0], b0, a1, 2);
      acc[6][1] = vfmaq_laneq_f32(acc[6][1], b1, a1, 2);
      acc[7][0] = vfmaq_laneq_f32(acc[7][0], b0, a1, 3);
      acc[7][1] = vfmaq_laneq_f32(acc[7][1], b1, a1, 3);
      pa += MR;
      pb += NR;
    }
    for (std::size_t r = 0; r < MR; ++r) {
      float* row = c + r * ldc;
      if (accumulate) {
        acc[r][0] = vaddq_f32(vld1q_f32(row), acc[r][0]);
        acc[r][1] = vaddq_f32(vld1q_f32(row + 4), acc[r][1]);
      }
      vst1q_f32(row, acc[r][0]);
      vst1q_f32(row + 4, acc[r][1]);
    }
  }
};

void sgemm_neon(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const float* a,
                std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc,
                bool accumulate) {
  blocked_gemm<NeonMicro>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void axpy_neon(std::size_t n, float alpha, const float* x, float* y) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(va, vld1q_f32(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_neon(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += x[i];
}

void relu_neon(std::size_t n, const float* x, float* y) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(x + i);
    vst1q_f32(y + i, vbslq_f32(vcgtq_f32(v, zero), v, zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_neon(std::size_t n, const float* x, const float* dy, float* dx) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const uint32x4_t keep = vcgtq_f32(vld1q_f32(x + i), zero);
    const float32x4_t g = vbslq_f32(keep, vld1q_f32(dy + i), zero);
    vst1q_f32(dx + i, vaddq_f32(vld1q_f32(dx + i), g));
  }
  for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
}

void complex_power_neon(std::size_t n_bins, const float* z, float* out) {
  std::size_t i = 0;
  for (; i + 4 <= n_bins; i += 4) {
    const float32x4x2_t v = vld2q_f32(z + 2 * i);
    vst1q_f32(out + i, vaddq_f32(vmulq_f32(v.val[0], v.val[0]), vmulq_f32(v.val[1], v.val[1])));
  }
  for (; i < n_bins; ++i) {
    const float re = z[2 * i];
    const float im = z[2 * i + 1];
    out[i] = re * re + im * im;
  }
}

double dot_neon(std::size_t n, const float* x, const float* y) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vx = vcvt_f64_f32(vld1_f32(x + i));
    const float64x2_t vy = vcvt_f64_f32(vld1_f32(y + i));
    acc = vfmaq_f64(acc, vx, vy);
  }
  double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) total += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return total;
}

constexpr KernelTable kNeon{
    Isa::Neon,          sgemm_neon,         axpy_neon, add_neon, relu_neon,
    relu_backward_neon, complex_power_neon, dot_neon,
};

}  // namespace

const KernelTable& neon_table() noexcept { return kNeon; }

}  // namespace ccml::simd
