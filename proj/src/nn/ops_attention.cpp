#include <algorithm>
#include <cmath>
#include <limits>

#include "ops_common.hpp"

namespace ccml::nn {

using detail::input_data;
using detail::input_grad;
using detail::shape_fail;

template <typename T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                       std::size_t heads) {
  using simd::Trans;
  detail::require_defined("attention", q.defined() && k.defined() && v.defined(), "operand");
  const Shape& s = q.shape();
  if (s.rank() != 3 || k.shape() != s || v.shape() != s) {
    shape_fail("attention", "q/k/v must share a [B,S,D] shape, got " + s.str() + ", " + k.shape().str() + ", " +
                                v.shape().str());
  }
  const std::size_t B = s[0], S = s[1], D = s[2];
  if (heads == 0 || D % heads != 0) {
    shape_fail("attention", "embedding dim " + std::to_string(D) + " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = D / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  std::vector<T> probs(B * heads * S * S);
  std::vector<T> out(B * S * D);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = b * S * D + h * dh;
      T* p = probs.data() + (b * heads + h) * S * S;
      simd::gemm<T>(Trans::No, Trans::Yes, S, S, dh, q.values().data() + off, D, k.values().data() + off, D, p, S,
                    false);
      for (std::size_t i = 0; i < S; ++i) {
        T* row = p + i * S;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < S; ++j) {
          row[j] *= scale;
          mx = std::max(mx, row[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          const double e = std::exp(static_cast<double>(row[j] - mx));
          row[j] = static_cast<T>(e);
          total += e;
        }
        for (std::size_t j = 0; j < S; ++j) row[j] = static_cast<T>(row[j] / total);
      }
      simd::gemm<T>(Trans::No, Trans::No, S, dh, S, p, S, v.values().data() + off, D, out.data() + off, D, false);
    }
  }

  return detail::make_result<T>(
      s, std::move(out), "attention", {&q, &k, &v},
      [probs = std::move(probs), B, S, D, dh, heads, scale](TensorNode<T>& o) {
        const T* qv = input_data(o, 0);
        const T* kv = input_data(o, 1);
        const T* vv = input_data(o, 2);
        T* gq = input_grad(o, 0);
        T* gk = input_grad(o, 1);
        T* gv = input_grad(o, 2);
        std::vector<T> ds(S * S);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = b * S * D + h * dh;
            const T* p = probs.data() + (b * heads + h) * S * S;
            const T* dout = o.grad.data() + off;
            if (gv) simd::gemm<T>(Trans::Yes, Trans::No, S, dh, S, p, S, dout, D, gv + off, D, true);
            if (!gq && !gk) continue;
            simd::gemm<T>(Trans::No, Trans::Yes, S, S, dh, dout, D, vv + off, D, ds.data(), S, false);
            for (std::size_t i = 0; i < S; ++i) {
              T* row = ds.data() + i * S;
              const T* prow = p + i * S;
              double dot = 0.0;
              for (std::size_t j = 0; j < S; ++j) dot += static_cast<double>(row[j]) * prow[j];
              for (std::size_t j = 0; j < S; ++j) row[j] = static_cast<T>(prow[j] * (row[j] - dot) * scale);
            }
            if (gq) simd::gemm<T>(Trans::No, Trans::No, S, dh, S, ds.data(), S, kv + off, D, gq + off, D, true);
            if (gk) simd::gemm<T>(Trans::Yes, Trans::No, S, dh, S, ds.data(), S, qv + off, D, gk + off, D, true);
          }
        }
      });
}

template Tensor<float> scaled_dot_product_attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                                    std::size_t);
template Tensor<double> scaled_dot_product_attention(const Tensor<double>&, const Tensor<double>&,
                                                     const Tensor<double>&, std::size_t);

}  // namespace ccml::nn
