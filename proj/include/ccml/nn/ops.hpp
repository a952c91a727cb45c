#pragma once

// Differentiable operations. Every op is a free function template
// instantiated for float (training) and double (gradient checking). Shape
// violations raise ShapeError naming the op.

#include <cstdint>
#include <vector>

#include "ccml/nn/tensor.hpp"

namespace ccml::nn {

// ---- element-wise and reductions -------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
/// Sum / mean of every element, as a [1] tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
/// Exact (erf) GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Removes `axis`.
template <typename T> Tensor<T> reduce_mean(const Tensor<T>& x, std::size_t axis);
template <typename T> Tensor<T> reduce_max(const Tensor<T>& x, std::size_t axis);

enum class PoolKind { Mean, Max };
/// [N, C, ...] -> [N, C], pooling over every trailing axis.
template <typename T> Tensor<T> global_pool(const Tensor<T>& x, PoolKind kind);

// ---- shape ------------------------------------------------------------------

template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);
/// Swaps two axes.
template <typename T> Tensor<T> transpose(const Tensor<T>& x, std::size_t a0, std::size_t a1);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
/// [1, ...] -> [batch, ...]
template <typename T> Tensor<T> broadcast_batch(const Tensor<T>& x, std::size_t batch);

// ---- linear -----------------------------------------------------------------

/// [M,K] x [K,N] -> [M,N], or batched [B,M,K] x [B,K,N] -> [B,M,N].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// x [..., in], weight [out, in], bias [out] (optional) -> [..., out].
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

struct Conv2dParams {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;

  static Conv2dParams same(std::size_t kh, std::size_t kw);  // stride 1, output size = input size
  static Conv2dParams uniform(std::size_t pad, std::size_t stride = 1);
};

/// x [N,C,H,W], weight [O,C,KH,KW], bias [O] (optional) -> [N,O,Ho,Wo] with
/// Ho = (H + pad_top + pad_bottom - KH) / stride_h + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dParams& p);

/// Non-overlapping max pooling with window (kh, kw) and equal stride; trailing
/// rows/columns that do not fill a window are dropped.
template <typename T> Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kh, std::size_t kw);

// ---- normalization and regularization ---------------------------------------

/// Over the last axis.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5);

template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;  // [C]
  Tensor<T> running_var;   // [C]
};

/// x [N, C, ...]. Train mode normalizes with batch statistics (biased
/// variance) and updates the running estimates in place (unbiased variance,
/// running = (1 - momentum) * running + momentum * batch). Eval mode uses the
/// running estimates and leaves them untouched.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormStats<T>& stats, bool training, double momentum = 0.1,
                     double eps = 1e-5);

/// Inverted dropout: kept values are scaled by 1/(1-p). Identity when not
/// training or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed, bool training);

// ---- transformer pieces -----------------------------------------------------

/// x [B,S,D] + pos [1,S,D] (pos broadcast over the batch).
template <typename T> Tensor<T> embedding_add(const Tensor<T>& x, const Tensor<T>& pos);

/// x [N,C,H,W] -> [N, gh*gw, C*ph*pw] with gh = (H-ph)/sh + 1 (likewise gw).
/// Strides default to the patch size (non-overlapping). Patches are numbered
/// row-major over the grid; within a patch, values are ordered (c, i, j).
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& x, std::size_t ph, std::size_t pw, std::size_t sh = 0,
                          std::size_t sw = 0);

/// q, k, v [B,S,D] with D divisible by `heads` -> [B,S,D]. Softmax(QK^T/sqrt(d))V
/// per head, heads occupying consecutive slices of D.
template <typename T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k,
                                       const Tensor<T>& v, std::size_t heads);

// ---- loss -------------------------------------------------------------------

/// Mean binary cross-entropy on logits; `targets` in [0,1] receive no gradient.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

}  // namespace ccml::nn
