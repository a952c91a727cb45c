#include <algorithm>
#include <cmath>
#include <limits>

#include "ccml/util/rng.hpp"
#include "ops_common.hpp"

namespace ccml::nn {

using detail::input_data;
using detail::input_grad;
using detail::shape_fail;

namespace {

template <typename T>
void same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_defined(op, a.defined() && b.defined(), "operand");
  if (a.shape() != b.shape()) shape_fail(op, "shapes " + a.shape().str() + " and " + b.shape().str() + " differ");
}

template <typename T>
T stable_sigmoid(T z) {
  if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

}  // namespace

// ---- element-wise -------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape("add", a, b);
  std::vector<T> out(a.values());
  detail::add_into(out.size(), b.values().data(), out.data());
  return detail::make_result<T>(a.shape(), std::move(out), "add", {&a, &b}, [](TensorNode<T>& o) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (T* g = input_grad(o, i)) detail::add_into(o.grad.size(), o.grad.data(), g);
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape("sub", a, b);
  std::vector<T> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), "sub", {&a, &b}, [](TensorNode<T>& o) {
    if (T* g = input_grad(o, 0)) detail::add_into(o.grad.size(), o.grad.data(), g);
    if (T* g = input_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), "mul", {&a, &b}, [](TensorNode<T>& o) {
    const T* x = input_data(o, 0);
    const T* y = input_data(o, 1);
    if (T* g = input_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * y[i];
    }
    if (T* g = input_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * x[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  detail::require_defined("scale", a.defined(), "operand");
  std::vector<T> out(a.values());
  for (T& v : out) v *= s;
  return detail::make_result<T>(a.shape(), std::move(out), "scale", {&a}, [s](TensorNode<T>& o) {
    if (T* g = input_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += s * o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  detail::require_defined("sum", a.defined(), "operand");
  double acc = 0.0;
  for (T v : a.values()) acc += static_cast<double>(v);
  return detail::make_result<T>(Shape{1}, {static_cast<T>(acc)}, "sum", {&a}, [](TensorNode<T>& o) {
    if (T* g = input_grad(o, 0)) {
      const std::size_t n = o.inputs[0]->data.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  detail::require_defined("mean", a.defined(), "operand");
  if (a.numel() == 0) shape_fail("mean", "empty tensor");
  double acc = 0.0;
  for (T v : a.values()) acc += static_cast<double>(v);
  const double n = static_cast<double>(a.numel());
  return detail::make_result<T>(Shape{1}, {static_cast<T>(acc / n)}, "mean", {&a}, [n](TensorNode<T>& o) {
    if (T* g = input_grad(o, 0)) {
      const T share = static_cast<T>(static_cast<double>(o.grad[0]) / n);
      const std::size_t count = o.inputs[0]->data.size();
      for (std::size_t i = 0; i < count; ++i) g[i] += share;
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  detail::require_defined("relu", x.defined(), "input");
  std::vector<T> out(x.numel());
  if constexpr (std::is_same_v<T, float>) {
    simd::kernels().relu(out.size(), x.values().data(), out.data());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] > 0 ? x.values()[i] : T{0};
  }
  return detail::make_result<T>(x.shape(), std::move(out), "relu", {&x}, [](TensorNode<T>& o) {
    T* g = input_grad(o, 0);
    if (!g) return;
    const T* xi = input_data(o, 0);
    if constexpr (std::is_same_v<T, float>) {
      simd::kernels().relu_backward(o.grad.size(), xi, o.grad.data(), g);
    } else {
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (xi[i] > 0) g[i] += o.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  detail::require_defined("gelu", x.defined(), "input");
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.values()[i];
    out[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return detail::make_result<T>(x.shape(), std::move(out), "gelu", {&x}, [](TensorNode<T>& o) {
    T* g = input_grad(o, 0);
    if (!g) return;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    const T* xi = input_data(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double v = xi[i];
      const double d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += static_cast<T>(d * static_cast<double>(o.grad[i]));
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  detail::require_defined("sigmoid", x.defined(), "input");
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(x.values()[i]);
  auto y = out;
  return detail::make_result<T>(x.shape(), std::move(out), "sigmoid", {&x},
                                [y = std::move(y)](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  for (std::size_t i = 0; i < y.size(); ++i) g[i] += o.grad[i] * y[i] * (T{1} - y[i]);
                                });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  detail::require_defined("softmax", x.defined(), "input");
  const auto [outer, n, inner] = detail::split_axis("softmax", x.shape(), axis);
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < inner; ++r) {
      const std::size_t base = o * n * inner + r;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, xv[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(static_cast<double>(xv[base + i * inner] - mx));
        out[base + i * inner] = static_cast<T>(e);
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) {
        out[base + i * inner] = static_cast<T>(static_cast<double>(out[base + i * inner]) / total);
      }
    }
  }
  auto y = out;
  return detail::make_result<T>(
      x.shape(), std::move(out), "softmax", {&x},
      [y = std::move(y), outer = outer, n = n, inner = inner](TensorNode<T>& o) {
        T* g = input_grad(o, 0);
        if (!g) return;
        for (std::size_t a = 0; a < outer; ++a) {
          for (std::size_t r = 0; r < inner; ++r) {
            const std::size_t base = a * n * inner + r;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              dot += static_cast<double>(o.grad[base + i * inner]) * y[base + i * inner];
            }
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t k = base + i * inner;
              g[k] += static_cast<T>(y[k] * (static_cast<double>(o.grad[k]) - dot));
            }
          }
        }
      });
}

// ---- reductions -----------------------------------------------------------------

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, std::size_t axis) {
  detail::require_defined("reduce_mean", x.defined(), "input");
  const auto [outer, n, inner] = detail::split_axis("reduce_mean", x.shape(), axis);
  if (n == 0) shape_fail("reduce_mean", "empty axis");
  std::vector<T> out(outer * inner);
  const T* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < inner; ++r) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += xv[(o * n + i) * inner + r];
      out[o * inner + r] = static_cast<T>(acc / static_cast<double>(n));
    }
  }
  return detail::make_result<T>(detail::drop_axis(x.shape(), axis), std::move(out), "reduce_mean", {&x},
                                [outer = outer, n = n, inner = inner](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  const T inv = static_cast<T>(1.0 / static_cast<double>(n));
                                  for (std::size_t a = 0; a < outer; ++a) {
                                    for (std::size_t i = 0; i < n; ++i) {
                                      for (std::size_t r = 0; r < inner; ++r) {
                                        g[(a * n + i) * inner + r] += o.grad[a * inner + r] * inv;
                                      }
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x, std::size_t axis) {
  detail::require_defined("reduce_max", x.defined(), "input");
  const auto [outer, n, inner] = detail::split_axis("reduce_max", x.shape(), axis);
  if (n == 0) shape_fail("reduce_max", "empty axis");
  std::vector<T> out(outer * inner);
  std::vector<std::size_t> arg(outer * inner);
  const T* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < inner; ++r) {
      std::size_t best = (o * n) * inner + r;
      for (std::size_t i = 1; i < n; ++i) {
        const std::size_t k = (o * n + i) * inner + r;
        if (xv[k] > xv[best]) best = k;  // first maximum wins ties
      }
      out[o * inner + r] = xv[best];
      arg[o * inner + r] = best;
    }
  }
  return detail::make_result<T>(detail::drop_axis(x.shape(), axis), std::move(out), "reduce_max", {&x},
                                [arg = std::move(arg)](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += o.grad[i];
                                });
}

template <typename T>
Tensor<T> global_pool(const Tensor<T>& x, PoolKind kind) {
  detail::require_defined("global_pool", x.defined(), "input");
  if (x.shape().rank() < 3) shape_fail("global_pool", "expects [N,C,...], got " + x.shape().str());
  const Shape flat{x.dim(0), x.dim(1), x.shape().span_numel(2, x.shape().rank())};
  const Tensor<T> r = reshape(x, flat);
  return kind == PoolKind::Mean ? reduce_mean(r, 2) : reduce_max(r, 2);
}

// ---- shape ----------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  detail::require_defined("reshape", x.defined(), "input");
  if (shape.numel() != x.numel()) {
    shape_fail("reshape", "cannot view " + x.shape().str() + " as " + shape.str());
  }
  return detail::make_result<T>(shape, x.values(), "reshape", {&x}, [](TensorNode<T>& o) {
    if (T* g = input_grad(o, 0)) detail::add_into(o.grad.size(), o.grad.data(), g);
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::size_t a0, std::size_t a1) {
  detail::require_defined("transpose", x.defined(), "input");
  const Shape& s = x.shape();
  if (a0 >= s.rank() || a1 >= s.rank()) shape_fail("transpose", "axes out of range for " + s.str());
  if (a0 == a1) return reshape(x, s);
  if (a0 > a1) std::swap(a0, a1);
  const std::size_t outer = s.span_numel(0, a0), n0 = s[a0], mid = s.span_numel(a0 + 1, a1), n1 = s[a1],
                    inner = s.span_numel(a1 + 1, s.rank());
  std::vector<std::size_t> d = s.dims();
  std::swap(d[a0], d[a1]);
  // in[o][i][m][j][r] -> out[o][j][m][i][r]
  auto for_each = [=](auto&& fn) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t m = 0; m < mid; ++m)
          for (std::size_t j = 0; j < n1; ++j) {
            const std::size_t src = (((o * n0 + i) * mid + m) * n1 + j) * inner;
            const std::size_t dst = (((o * n1 + j) * mid + m) * n0 + i) * inner;
            fn(src, dst);
          }
  };
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  for_each([&](std::size_t src, std::size_t dst) { std::copy_n(xv + src, inner, out.data() + dst); });
  return detail::make_result<T>(Shape(std::move(d)), std::move(out), "transpose", {&x},
                                [for_each, inner](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  for_each([&](std::size_t src, std::size_t dst) {
                                    for (std::size_t r = 0; r < inner; ++r) g[src + r] += o.grad[dst + r];
                                  });
                                });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) shape_fail("concat", "no inputs");
  for (const auto& t : xs) detail::require_defined("concat", t.defined(), "input");
  const Shape& s0 = xs[0].shape();
  const auto split0 = detail::split_axis("concat", s0, axis);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    bool ok = s.rank() == s0.rank();
    for (std::size_t d = 0; ok && d < s.rank(); ++d) ok = d == axis || s[d] == s0[d];
    if (!ok) shape_fail("concat", "shape " + s.str() + " incompatible with " + s0.str() + " on axis " + std::to_string(axis));
    widths.push_back(s[axis]);
    total += s[axis];
  }
  const std::size_t outer = split0.outer, inner = split0.inner;
  std::vector<T> out(outer * total * inner);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const T* src = xs[k].values().data();
    const std::size_t block = widths[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * block, block, out.data() + (o * total + off) * inner);
    }
    off += widths[k];
  }
  std::vector<std::size_t> d = s0.dims();
  d[axis] = total;
  return detail::make_result<T>(Shape(std::move(d)), std::move(out), "concat", xs,
                                [widths, outer, inner, total](TensorNode<T>& o) {
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < widths.size(); ++k) {
                                    const std::size_t block = widths[k] * inner;
                                    if (T* g = input_grad(o, k)) {
                                      for (std::size_t a = 0; a < outer; ++a) {
                                        detail::add_into(block, o.grad.data() + (a * total + off) * inner, g + a * block);
                                      }
                                    }
                                    off += widths[k];
                                  }
                                });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  detail::require_defined("slice", x.defined(), "input");
  const auto [outer, n, inner] = detail::split_axis("slice", x.shape(), axis);
  if (length == 0 || start + length > n) {
    shape_fail("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                            ") outside axis of size " + std::to_string(n));
  }
  std::vector<T> out(outer * length * inner);
  const T* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv + (o * n + start) * inner, length * inner, out.data() + o * length * inner);
  }
  std::vector<std::size_t> d = x.shape().dims();
  d[axis] = length;
  return detail::make_result<T>(Shape(std::move(d)), std::move(out), "slice", {&x},
                                [outer = outer, n = n, inner = inner, start, length](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  for (std::size_t a = 0; a < outer; ++a) {
                                    detail::add_into(length * inner, o.grad.data() + a * length * inner,
                                                     g + (a * n + start) * inner);
                                  }
                                });
}

template <typename T>
Tensor<T> broadcast_batch(const Tensor<T>& x, std::size_t batch) {
  detail::require_defined("broadcast_batch", x.defined(), "input");
  if (x.shape().rank() == 0 || x.dim(0) != 1) shape_fail("broadcast_batch", "expects leading dim 1, got " + x.shape().str());
  const std::size_t per = x.numel();
  std::vector<T> out(per * batch);
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(x.values().data(), per, out.data() + b * per);
  std::vector<std::size_t> d = x.shape().dims();
  d[0] = batch;
  return detail::make_result<T>(Shape(std::move(d)), std::move(out), "broadcast_batch", {&x},
                                [per, batch](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  for (std::size_t b = 0; b < batch; ++b) detail::add_into(per, o.grad.data() + b * per, g);
                                });
}

// ---- linear -----------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  using simd::Trans;
  detail::require_defined("matmul", a.defined() && b.defined(), "operand");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool batched = sa.rank() == 3;
  if (!((sa.rank() == 2 && sb.rank() == 2) || (batched && sb.rank() == 3 && sa[0] == sb[0]))) {
    shape_fail("matmul", "unsupported operand shapes " + sa.str() + " x " + sb.str());
  }
  const std::size_t B = batched ? sa[0] : 1;
  const std::size_t M = sa[sa.rank() - 2], K = sa[sa.rank() - 1];
  const std::size_t K2 = sb[sb.rank() - 2], N = sb[sb.rank() - 1];
  if (K != K2) shape_fail("matmul", "inner dims differ: " + sa.str() + " x " + sb.str());
  std::vector<T> out(B * M * N);
  for (std::size_t i = 0; i < B; ++i) {
    simd::gemm<T>(Trans::No, Trans::No, M, N, K, a.values().data() + i * M * K, K,
                  b.values().data() + i * K * N, N, out.data() + i * M * N, N, false);
  }
  Shape so = batched ? Shape{B, M, N} : Shape{M, N};
  return detail::make_result<T>(so, std::move(out), "matmul", {&a, &b}, [B, M, N, K](TensorNode<T>& o) {
    const T* av = input_data(o, 0);
    const T* bv = input_data(o, 1);
    T* ga = input_grad(o, 0);
    T* gb = input_grad(o, 1);
    for (std::size_t i = 0; i < B; ++i) {
      const T* dc = o.grad.data() + i * M * N;
      if (ga) simd::gemm<T>(Trans::No, Trans::Yes, M, K, N, dc, N, bv + i * K * N, N, ga + i * M * K, K, true);
      if (gb) simd::gemm<T>(Trans::Yes, Trans::No, K, N, M, av + i * M * K, K, dc, N, gb + i * K * N, N, true);
    }
  });
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  using simd::Trans;
  detail::require_defined("dense", x.defined() && weight.defined(), "operand");
  if (weight.shape().rank() != 2) shape_fail("dense", "weight must be [out,in], got " + weight.shape().str());
  const std::size_t out_f = weight.dim(0), in_f = weight.dim(1);
  if (x.shape().rank() == 0 || x.dim(x.shape().rank() - 1) != in_f) {
    shape_fail("dense", "input " + x.shape().str() + " does not end in " + std::to_string(in_f));
  }
  if (bias.defined() && bias.shape() != Shape{out_f}) {
    shape_fail("dense", "bias " + bias.shape().str() + " must be [" + std::to_string(out_f) + "]");
  }
  const std::size_t M = x.numel() / in_f;
  std::vector<T> out(M * out_f);
  simd::gemm<T>(Trans::No, Trans::Yes, M, out_f, in_f, x.values().data(), in_f, weight.values().data(), in_f,
                out.data(), out_f, false);
  if (bias.defined()) {
    for (std::size_t i = 0; i < M; ++i) detail::add_into(out_f, bias.values().data(), out.data() + i * out_f);
  }
  std::vector<std::size_t> d = x.shape().dims();
  d.back() = out_f;
  return detail::make_result<T>(Shape(std::move(d)), std::move(out), "dense", {&x, &weight, &bias},
                                [M, out_f, in_f](TensorNode<T>& o) {
                                  const T* dy = o.grad.data();
                                  if (T* gx = input_grad(o, 0)) {
                                    simd::gemm<T>(Trans::No, Trans::No, M, in_f, out_f, dy, out_f, input_data(o, 1),
                                                  in_f, gx, in_f, true);
                                  }
                                  if (T* gw = input_grad(o, 1)) {
                                    simd::gemm<T>(Trans::Yes, Trans::No, out_f, in_f, M, dy, out_f, input_data(o, 0),
                                                  in_f, gw, in_f, true);
                                  }
                                  if (T* gb = input_grad(o, 2)) {
                                    for (std::size_t j = 0; j < out_f; ++j) {
                                      double acc = 0.0;
                                      for (std::size_t i = 0; i < M; ++i) acc += dy[i * out_f + j];
                                      gb[j] += static_cast<T>(acc);
                                    }
                                  }
                                });
}

// ---- regularization / transformer glue / loss ---------------------------------------

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed, bool training) {
  detail::require_defined("dropout", x.defined(), "input");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("dropout probability must be in [0,1]");
  if (!training || p == 0.0) return x;
  std::vector<T> mask(x.numel(), T{0});
  if (p < 1.0) {
    Rng rng(seed);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (T& m : mask) m = rng.uniform() >= p ? keep_scale : T{0};
  }
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * mask[i];
  return detail::make_result<T>(x.shape(), std::move(out), "dropout", {&x}, [mask = std::move(mask)](TensorNode<T>& o) {
    T* g = input_grad(o, 0);
    if (!g) return;
    for (std::size_t i = 0; i < mask.size(); ++i) g[i] += o.grad[i] * mask[i];
  });
}

template <typename T>
Tensor<T> embedding_add(const Tensor<T>& x, const Tensor<T>& pos) {
  detail::require_defined("embedding_add", x.defined() && pos.defined(), "operand");
  const Shape& s = x.shape();
  if (s.rank() != 3 || pos.shape() != Shape{1, s[1], s[2]}) {
    shape_fail("embedding_add", "input " + s.str() + " incompatible with positions " + pos.shape().str());
  }
  const std::size_t per = s[1] * s[2], batch = s[0];
  std::vector<T> out(x.values());
  for (std::size_t b = 0; b < batch; ++b) detail::add_into(per, pos.values().data(), out.data() + b * per);
  return detail::make_result<T>(s, std::move(out), "embedding_add", {&x, &pos}, [per, batch](TensorNode<T>& o) {
    if (T* g = input_grad(o, 0)) detail::add_into(o.grad.size(), o.grad.data(), g);
    if (T* g = input_grad(o, 1)) {
      for (std::size_t b = 0; b < batch; ++b) detail::add_into(per, o.grad.data() + b * per, g);
    }
  });
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  same_shape("bce_with_logits", logits, targets);
  if (logits.numel() == 0) shape_fail("bce_with_logits", "empty input");
  const T* z = logits.values().data();
  const T* y = targets.values().data();
  const std::size_t n = logits.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z[i];
    acc += std::max(zi, 0.0) - zi * static_cast<double>(y[i]) + std::log1p(std::exp(-std::fabs(zi)));
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<T> yv(y, y + n);
  return detail::make_result<T>(Shape{1}, {static_cast<T>(acc * inv_n)}, "bce_with_logits", {&logits},
                                [yv = std::move(yv), inv_n](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  const T* zi = input_data(o, 0);
                                  const double up = static_cast<double>(o.grad[0]) * inv_n;
                                  for (std::size_t i = 0; i < yv.size(); ++i) {
                                    g[i] += static_cast<T>((static_cast<double>(stable_sigmoid(zi[i])) - yv[i]) * up);
                                  }
                                });
}

#define CCML_BASIC(T)                                                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> reduce_mean(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> reduce_max(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> global_pool(const Tensor<T>&, PoolKind);                                  \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                  \
  template Tensor<T> transpose(const Tensor<T>&, std::size_t, std::size_t);                    \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                       \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);           \
  template Tensor<T> broadcast_batch(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> dropout(const Tensor<T>&, double, std::uint64_t, bool);                   \
  template Tensor<T> embedding_add(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&);
CCML_INSTANTIATE_FT(CCML_BASIC)
#undef CCML_BASIC

}  // namespace ccml::nn
