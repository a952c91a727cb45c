#include <algorithm>
#include <cstring>

#include "ops_common.hpp"

namespace ccml::nn {

using detail::input_data;
using detail::input_grad;
using detail::shape_fail;

Conv2dParams Conv2dParams::same(std::size_t kh, std::size_t kw) {
  Conv2dParams p;
  // Odd leftover padding goes to the bottom/right edge.
  p.pad_top = (kh - 1) / 2;
  p.pad_bottom = kh - 1 - p.pad_top;
  p.pad_left = (kw - 1) / 2;
  p.pad_right = kw - 1 - p.pad_left;
  return p;
}

Conv2dParams Conv2dParams::uniform(std::size_t pad, std::size_t stride) {
  Conv2dParams p;
  p.stride_h = p.stride_w = stride;
  p.pad_top = p.pad_bottom = p.pad_left = p.pad_right = pad;
  return p;
}

namespace {

struct ConvGeom {
  std::size_t N, C, H, W, O, KH, KW, Ho, Wo;
  Conv2dParams p;

  std::size_t ckk() const { return C * KH * KW; }
  std::size_t spatial() const { return Ho * Wo; }
  // 1x1 kernels without padding or stride read the input directly.
  bool direct() const {
    return KH == 1 && KW == 1 && p.stride_h == 1 && p.stride_w == 1 && p.pad_top == 0 && p.pad_bottom == 0 &&
           p.pad_left == 0 && p.pad_right == 0;
  }
};

template <typename T>
void im2col(const ConvGeom& g, const T* x, T* cols) {
  const auto pt = static_cast<std::ptrdiff_t>(g.p.pad_top);
  const auto pl = static_cast<std::ptrdiff_t>(g.p.pad_left);
  const auto H = static_cast<std::ptrdiff_t>(g.H);
  const auto W = static_cast<std::ptrdiff_t>(g.W);
  for (std::size_t c = 0; c < g.C; ++c) {
    for (std::size_t i = 0; i < g.KH; ++i) {
      for (std::size_t j = 0; j < g.KW; ++j) {
        T* row = cols + ((c * g.KH + i) * g.KW + j) * g.spatial();
        for (std::size_t oh = 0; oh < g.Ho; ++oh) {
          T* dst = row + oh * g.Wo;
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.p.stride_h + i) - pt;
          if (ih < 0 || ih >= H) {
            std::fill_n(dst, g.Wo, T{0});
            continue;
          }
          const T* src = x + (c * g.H + static_cast<std::size_t>(ih)) * g.W;
          for (std::size_t ow = 0; ow < g.Wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.p.stride_w + j) - pl;
            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, T* dx) {
  const auto pt = static_cast<std::ptrdiff_t>(g.p.pad_top);
  const auto pl = static_cast<std::ptrdiff_t>(g.p.pad_left);
  const auto H = static_cast<std::ptrdiff_t>(g.H);
  const auto W = static_cast<std::ptrdiff_t>(g.W);
  for (std::size_t c = 0; c < g.C; ++c) {
    for (std::size_t i = 0; i < g.KH; ++i) {
      for (std::size_t j = 0; j < g.KW; ++j) {
        const T* row = cols + ((c * g.KH + i) * g.KW + j) * g.spatial();
        for (std::size_t oh = 0; oh < g.Ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.p.stride_h + i) - pt;
          if (ih < 0 || ih >= H) continue;
          T* dst = dx + (c * g.H + static_cast<std::size_t>(ih)) * g.W;
          const T* src = row + oh * g.Wo;
          for (std::size_t ow = 0; ow < g.Wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.p.stride_w + j) - pl;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, const Conv2dParams& p) {
  using simd::Trans;
  detail::require_defined("conv2d", x.defined() && weight.defined(), "operand");
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.rank() != 4) shape_fail("conv2d", "input must be [N,C,H,W], got " + sx.str());
  if (sw.rank() != 4 || sw[1] != sx[1]) {
    shape_fail("conv2d", "weight " + sw.str() + " incompatible with input " + sx.str());
  }
  if (p.stride_h == 0 || p.stride_w == 0) shape_fail("conv2d", "stride must be positive");
  ConvGeom g{sx[0], sx[1], sx[2], sx[3], sw[0], sw[2], sw[3], 0, 0, p};
  const std::size_t span_h = g.H + p.pad_top + p.pad_bottom, span_w = g.W + p.pad_left + p.pad_right;
  if (g.KH == 0 || g.KW == 0 || span_h < g.KH || span_w < g.KW) {
    shape_fail("conv2d", "kernel " + std::to_string(g.KH) + "x" + std::to_string(g.KW) +
                             " larger than padded input " + std::to_string(span_h) + "x" + std::to_string(span_w));
  }
  g.Ho = (span_h - g.KH) / p.stride_h + 1;
  g.Wo = (span_w - g.KW) / p.stride_w + 1;
  if (bias.defined() && bias.shape() != Shape{g.O}) {
    shape_fail("conv2d", "bias " + bias.shape().str() + " must be [" + std::to_string(g.O) + "]");
  }

  const std::size_t in_per = g.C * g.H * g.W, out_per = g.O * g.spatial();
  std::vector<T> out(g.N * out_per);
  std::vector<T> cols(g.direct() ? 0 : g.ckk() * g.spatial());
  for (std::size_t n = 0; n < g.N; ++n) {
    const T* xn = x.values().data() + n * in_per;
    const T* b = xn;
    if (!g.direct()) {
      im2col(g, xn, cols.data());
      b = cols.data();
    }
    T* yn = out.data() + n * out_per;
    simd::gemm<T>(Trans::No, Trans::No, g.O, g.spatial(), g.ckk(), weight.values().data(), g.ckk(), b,
                  g.spatial(), yn, g.spatial(), false);
    if (bias.defined()) {
      for (std::size_t o = 0; o < g.O; ++o) {
        const T bv = bias.values()[o];
        T* row = yn + o * g.spatial();
        for (std::size_t s = 0; s < g.spatial(); ++s) row[s] += bv;
      }
    }
  }

  return detail::make_result<T>(
      Shape{g.N, g.O, g.Ho, g.Wo}, std::move(out), "conv2d", {&x, &weight, &bias},
      [g, in_per, out_per](TensorNode<T>& o) {
        const T* xv = input_data(o, 0);
        const T* wv = input_data(o, 1);
        T* gx = input_grad(o, 0);
        T* gw = input_grad(o, 1);
        T* gb = input_grad(o, 2);
        // The column buffer is rebuilt here rather than kept from the forward pass.
        std::vector<T> cols(g.direct() ? 0 : g.ckk() * g.spatial());
        std::vector<T> dcols(gx && !g.direct() ? g.ckk() * g.spatial() : 0);
        for (std::size_t n = 0; n < g.N; ++n) {
          const T* dy = o.grad.data() + n * out_per;
          if (gw) {
            const T* b = xv + n * in_per;
            if (!g.direct()) {
              im2col(g, b, cols.data());
              b = cols.data();
            }
            simd::gemm<T>(Trans::No, Trans::Yes, g.O, g.ckk(), g.spatial(), dy, g.spatial(), b, g.spatial(), gw,
                          g.ckk(), true);
          }
          if (gx) {
            if (g.direct()) {
              simd::gemm<T>(Trans::Yes, Trans::No, g.ckk(), g.spatial(), g.O, wv, g.ckk(), dy, g.spatial(),
                            gx + n * in_per, g.spatial(), true);
            } else {
              simd::gemm<T>(Trans::Yes, Trans::No, g.ckk(), g.spatial(), g.O, wv, g.ckk(), dy, g.spatial(),
                            dcols.data(), g.spatial(), false);
              col2im_add(g, dcols.data(), gx + n * in_per);
            }
          }
          if (gb) {
            for (std::size_t c = 0; c < g.O; ++c) {
              double acc = 0.0;
              for (std::size_t s = 0; s < g.spatial(); ++s) acc += dy[c * g.spatial() + s];
              gb[c] += static_cast<T>(acc);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kh, std::size_t kw) {
  detail::require_defined("max_pool2d", x.defined(), "input");
  const Shape& s = x.shape();
  if (s.rank() != 4) shape_fail("max_pool2d", "input must be [N,C,H,W], got " + s.str());
  if (kh == 0 || kw == 0 || s[2] < kh || s[3] < kw) {
    shape_fail("max_pool2d", "window " + std::to_string(kh) + "x" + std::to_string(kw) + " does not fit " + s.str());
  }
  const std::size_t planes = s[0] * s[1], H = s[2], W = s[3], Ho = H / kh, Wo = W / kw;
  std::vector<T> out(planes * Ho * Wo);
  std::vector<std::size_t> arg(out.size());
  const T* xv = x.values().data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const std::size_t base = pl * H * W;
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        std::size_t best = base + (oh * kh) * W + ow * kw;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const std::size_t k = base + (oh * kh + i) * W + ow * kw + j;
            if (xv[k] > xv[best]) best = k;
          }
        }
        const std::size_t oi = (pl * Ho + oh) * Wo + ow;
        out[oi] = xv[best];
        arg[oi] = best;
      }
    }
  }
  return detail::make_result<T>(Shape{s[0], s[1], Ho, Wo}, std::move(out), "max_pool2d", {&x},
                                [arg = std::move(arg)](TensorNode<T>& o) {
                                  T* g = input_grad(o, 0);
                                  if (!g) return;
                                  for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += o.grad[i];
                                });
}

template <typename T>
Tensor<T> extract_patches(const Tensor<T>& x, std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw) {
  detail::require_defined("extract_patches", x.defined(), "input");
  const Shape& s = x.shape();
  if (s.rank() != 4) shape_fail("extract_patches", "input must be [N,C,H,W], got " + s.str());
  if (ph == 0 || pw == 0 || s[2] < ph || s[3] < pw) {
    shape_fail("extract_patches", "patch " + std::to_string(ph) + "x" + std::to_string(pw) + " does not fit " + s.str());
  }
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3];
  if (sh == 0) sh = ph;
  if (sw == 0) sw = pw;
  const std::size_t nf = (H - ph) / sh + 1, nt = (W - pw) / sw + 1, P = nf * nt, D = C * ph * pw;
  // Maps every output element to its source index.
  auto for_each = [=](auto&& fn) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t pf = 0; pf < nf; ++pf)
        for (std::size_t pt = 0; pt < nt; ++pt) {
          std::size_t dst = (n * P + pf * nt + pt) * D;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < ph; ++i) {
              const std::size_t src = ((n * C + c) * H + pf * sh + i) * W + pt * sw;
              fn(src, dst, pw);
              dst += pw;
            }
        }
  };
  std::vector<T> out(N * P * D);
  const T* xv = x.values().data();
  for_each([&](std::size_t src, std::size_t dst, std::size_t len) { std::copy_n(xv + src, len, out.data() + dst); });
  return detail::make_result<T>(Shape{N, P, D}, std::move(out), "extract_patches", {&x}, [for_each](TensorNode<T>& o) {
    T* g = input_grad(o, 0);
    if (!g) return;
    for_each([&](std::size_t src, std::size_t dst, std::size_t len) {
      for (std::size_t k = 0; k < len; ++k) g[src + k] += o.grad[dst + k];
    });
  });
}

#define CCML_CONV(T)                                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Conv2dParams&); \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t, std::size_t);                        \
  template Tensor<T> extract_patches(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);
CCML_INSTANTIATE_FT(CCML_CONV)
#undef CCML_CONV

}  // namespace ccml::nn
