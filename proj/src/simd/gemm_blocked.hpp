#pragma once

// Cache-blocked GEMM driver shared by the vectorized kernel TUs. Each TU
// includes this with its own ISA flags, so everything here has internal
// linkage to keep differently-compiled copies from being merged.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include "ccml/simd/kernels.hpp"

namespace ccml::simd {
namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockM = 96;
constexpr std::size_t kBlockN = 1024;

inline float elem_a(Trans ta, const float* a, std::size_t lda, std::size_t i, std::size_t p) {
  return ta == Trans::Yes ? a[p * lda + i] : a[i * lda + p];
}

// Panels of MR rows, k-major inside a panel: dst[panel][p][r].
template <std::size_t MR>
void pack_a(Trans ta, const float* a, std::size_t lda, std::size_t i0, std::size_t p0,
            std::size_t mc, std::size_t kc, float* dst) {
  for (std::size_t ir = 0; ir < mc; ir += MR) {
    const std::size_t rows = std::min(MR, mc - ir);
    for (std::size_t p = 0; p < kc; ++p) {
      std::size_t r = 0;
      if (ta == Trans::No) {
        for (; r < rows; ++r) dst[r] = a[(i0 + ir + r) * lda + p0 + p];
      } else {
        const float* src = a + (p0 + p) * lda + i0 + ir;
        for (; r < rows; ++r) dst[r] = src[r];
      }
      for (; r < MR; ++r) dst[r] = 0.0f;
      dst += MR;
    }
  }
}

// Panels of NR columns, k-major inside a panel: dst[panel][p][c].
template <std::size_t NR>
void pack_b(Trans tb, const float* b, std::size_t ldb, std::size_t p0, std::size_t j0,
            std::size_t kc, std::size_t nc, float* dst) {
  for (std::size_t jr = 0; jr < nc; jr += NR) {
    const std::size_t cols = std::min(NR, nc - jr);
    for (std::size_t p = 0; p < kc; ++p) {
      std::size_t c = 0;
      if (tb == Trans::No) {
        const float* src = b + (p0 + p) * ldb + j0 + jr;
        for (; c < cols; ++c) dst[c] = src[c];
      } else {
        for (; c < cols; ++c) dst[c] = b[(j0 + jr + c) * ldb + p0 + p];
      }
      for (; c < NR; ++c) dst[c] = 0.0f;
      dst += NR;
    }
  }
}

// Micro must provide MR, NR and
//   static void run(std::size_t kc, const float* pa, const float* pb,
//                   float* c, std::size_t ldc, bool accumulate);
// computing a full MR x NR tile.
template <class Micro>
void blocked_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                  const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
                  std::size_t ldc, bool accumulate) {
  constexpr std::size_t MR = Micro::MR;
  constexpr std::size_t NR = Micro::NR;
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) {
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0f);
    }
    return;
  }

  thread_local std::vector<float> packed_a;
  thread_local std::vector<float> packed_b;
  packed_a.resize(((kBlockM + MR - 1) / MR) * MR * kBlockK);
  packed_b.resize(((kBlockN + NR - 1) / NR) * NR * kBlockK);
  alignas(32) float tile[MR * NR];

  for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
    const std::size_t nc = std::min(kBlockN, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
      const std::size_t kc = std::min(kBlockK, k - p0);
      const bool acc = accumulate || p0 != 0;
      pack_b<NR>(tb, b, ldb, p0, j0, kc, nc, packed_b.data());
      for (std::size_t i0 = 0; i0 < m; i0 += kBlockM) {
        const std::size_t mc = std::min(kBlockM, m - i0);
        pack_a<MR>(ta, a, lda, i0, p0, mc, kc, packed_a.data());
        for (std::size_t jr = 0; jr < nc; jr += NR) {
          const std::size_t cols = std::min(NR, nc - jr);
          const float* pb = packed_b.data() + (jr / NR) * NR * kc;
          for (std::size_t ir = 0; ir < mc; ir += MR) {
            const std::size_t rows = std::min(MR, mc - ir);
            const float* pa = packed_a.data() + (ir / MR) * MR * kc;
            float* cij = c + (i0 + ir) * ldc + j0 + jr;
            if (rows == MR && cols == NR) {
              Micro::run(kc, pa, pb, cij, ldc, acc);
              continue;
            }
            if (acc) {
              for (std::size_t r = 0; r < rows; ++r) {
                std::memcpy(tile + r * NR, cij + r * ldc, cols * sizeof(float));
              }
            }
            Micro::run(kc, pa, pb, tile, NR, acc);
            for (std::size_t r = 0; r < rows; ++r) {
              std::memcpy(cij + r * ldc, tile + r * NR, cols * sizeof(float));
            }
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace ccml::simd
