#include <cmath>

#include "ops_common.hpp"

namespace ccml::nn {

using detail::input_grad;
using detail::shape_fail;

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  detail::require_defined("layer_norm", x.defined() && gamma.defined() && beta.defined(), "operand");
  const Shape& s = x.shape();
  if (s.rank() == 0) shape_fail("layer_norm", "scalar input");
  const std::size_t D = s[s.rank() - 1];
  if (gamma.shape() != Shape{D} || beta.shape() != Shape{D}) {
    shape_fail("layer_norm", "gamma/beta must be [" + std::to_string(D) + "], got " + gamma.shape().str() + " and " +
                                 beta.shape().str());
  }
  const std::size_t rows = x.numel() / D;
  std::vector<T> out(x.numel()), xhat(x.numel());
  std::vector<double> inv_std(rows);
  const T* xv = x.values().data();
  const T* gv = gamma.values().data();
  const T* bv = beta.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * D;
    double mu = 0.0;
    for (std::size_t i = 0; i < D; ++i) mu += row[i];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t i = 0; i < D; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(D);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < D; ++i) {
      const double h = (row[i] - mu) * inv_std[r];
      xhat[r * D + i] = static_cast<T>(h);
      out[r * D + i] = static_cast<T>(gv[i] * h + bv[i]);
    }
  }
  return detail::make_result<T>(
      s, std::move(out), "layer_norm", {&x, &gamma, &beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, D](TensorNode<T>& o) {
        const T* gv = detail::input_data(o, 1);
        const T* dy = o.grad.data();
        if (T* gx = input_grad(o, 0)) {
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < D; ++i) {
              const double dh = static_cast<double>(dy[r * D + i]) * gv[i];
              m1 += dh;
              m2 += dh * xhat[r * D + i];
            }
            m1 /= static_cast<double>(D);
            m2 /= static_cast<double>(D);
            for (std::size_t i = 0; i < D; ++i) {
              const double dh = static_cast<double>(dy[r * D + i]) * gv[i];
              gx[r * D + i] += static_cast<T>(inv_std[r] * (dh - m1 - xhat[r * D + i] * m2));
            }
          }
        }
        T* gg = input_grad(o, 1);
        T* gb = input_grad(o, 2);
        if (gg || gb) {
          for (std::size_t i = 0; i < D; ++i) {
            double ag = 0.0, ab = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
              ag += static_cast<double>(dy[r * D + i]) * xhat[r * D + i];
              ab += dy[r * D + i];
            }
            if (gg) gg[i] += static_cast<T>(ag);
            if (gb) gb[i] += static_cast<T>(ab);
          }
        }
      });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                     bool training, double momentum, double eps) {
  detail::require_defined("batch_norm", x.defined() && gamma.defined() && beta.defined(), "operand");
  detail::require_defined("batch_norm", stats.running_mean.defined() && stats.running_var.defined(), "running stats");
  const Shape& s = x.shape();
  if (s.rank() < 2) shape_fail("batch_norm", "input must be [N,C,...], got " + s.str());
  const std::size_t N = s[0], C = s[1], L = s.span_numel(2, s.rank());
  const Shape cs{C};
  if (gamma.shape() != cs || beta.shape() != cs || stats.running_mean.shape() != cs ||
      stats.running_var.shape() != cs) {
    shape_fail("batch_norm", "per-channel parameters must be [" + std::to_string(C) + "]");
  }
  const std::size_t M = N * L;
  const T* xv = x.values().data();
  auto at = [L, C](std::size_t n, std::size_t c, std::size_t l) { return (n * C + c) * L + l; };

  std::vector<double> mu(C), inv_std(C);
  if (training) {
    auto rm = stats.running_mean.data();
    auto rv = stats.running_var.data();
    for (std::size_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t l = 0; l < L; ++l) m += xv[at(n, c, l)];
      m /= static_cast<double>(M);
      double v = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t l = 0; l < L; ++l) v += (xv[at(n, c, l)] - m) * (xv[at(n, c, l)] - m);
      const double biased = v / static_cast<double>(M);
      const double unbiased = M > 1 ? v / static_cast<double>(M - 1) : biased;
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(biased + eps);
      rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * m);
      rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = stats.running_mean.values()[c];
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(stats.running_var.values()[c]) + eps);
    }
  }

  std::vector<T> out(x.numel()), xhat(x.numel());
  const T* gv = gamma.values().data();
  const T* bv = beta.values().data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t k = at(n, c, l);
        const double h = (xv[k] - mu[c]) * inv_std[c];
        xhat[k] = static_cast<T>(h);
        out[k] = static_cast<T>(gv[c] * h + bv[c]);
      }
    }
  }

  return detail::make_result<T>(
      s, std::move(out), training ? "batch_norm_train" : "batch_norm_eval", {&x, &gamma, &beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), N, C, L, M, training, at](TensorNode<T>& o) {
        const T* gv = detail::input_data(o, 1);
        const T* dy = o.grad.data();
        T* gx = input_grad(o, 0);
        T* gg = input_grad(o, 1);
        T* gb = input_grad(o, 2);
        for (std::size_t c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_h = 0.0;
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t l = 0; l < L; ++l) {
              const std::size_t k = at(n, c, l);
              sum_dy += dy[k];
              sum_dy_h += static_cast<double>(dy[k]) * xhat[k];
            }
          if (gg) gg[c] += static_cast<T>(sum_dy_h);
          if (gb) gb[c] += static_cast<T>(sum_dy);
          if (!gx) continue;
          const double scale = gv[c] * inv_std[c];
          const double inv_m = 1.0 / static_cast<double>(M);
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t l = 0; l < L; ++l) {
              const std::size_t k = at(n, c, l);
              double d = dy[k];
              if (training) d -= (sum_dy + xhat[k] * sum_dy_h) * inv_m;
              gx[k] += static_cast<T>(scale * d);
            }
        }
      });
}

#define CCML_NORM(T)                                                                                    \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);          \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormStats<T>&, \
                                bool, double, double);
CCML_INSTANTIATE_FT(CCML_NORM)
#undef CCML_NORM

}  // namespace ccml::nn
