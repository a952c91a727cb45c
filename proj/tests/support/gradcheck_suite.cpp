
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ccml/nn/ops.hpp"
#include "gradcheck_suite.hpp"
#include "test_support.hpp"

namespace ccml::testing {

using T64 = nn::Tensor<double>;
using Builder = std::function<T64(const std::vector<T64>&)>;

namespace {

using Results = std::vector<GradcheckResult>;

constexpr double kEps = 1e-5;
// Denominator floor: below this magnitude both gradients count as zero.
constexpr double kFloor = 1e-6;

T64 rand_tensor(Rng& rng, const nn::Shape& s, double lo = -1.0, double hi = 1.0) {
  return T64::from_data(s, testing::random_doubles(rng, s.numel(), lo, hi));
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

}  // namespace

double gradcheck(const Builder& f, std::vector<T64> inputs, Rng& rng, std::vector<bool> fixed,
                 std::size_t max_samples) {
  fixed.resize(inputs.size(), false);
  T64 probe;
  {
    nn::NoGradGuard guard;
    probe = f(inputs);
  }
  const T64 proj = rand_tensor(rng, probe.shape());
  auto loss = [&] { return nn::sum(nn::mul(f(inputs), proj)); };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].set_requires_grad(!fixed[i]);
    inputs[i].zero_grad();
  }
  loss().backward();

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (fixed[i]) continue;
    T64& x = inputs[i];
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    std::vector<std::size_t> idx(x.numel());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    if (idx.size() > max_samples) {
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(max_samples);
    }
    nn::NoGradGuard guard;
    for (std::size_t k : idx) {
      const double orig = x.data()[k];
      auto at = [&](double v) {
        x.data()[k] = v;
        const double r = loss().item();
        x.data()[k] = orig;
        return r;
      };
      const double f0 = at(orig);
      double err = 0.0;
      // A failing point whose one-sided slopes disagree straddles a relu or
      // max-pool switch; the step is shrunk (twice at most) so the stencil
      // lies on one smooth piece.
      for (double eps = kEps; eps >= kEps * 1e-2; eps *= 0.1) {
        const double fp = at(orig + eps), fm = at(orig - eps);
        const double numeric = (fp - fm) / (2 * eps);
        const double denom = std::max({std::fabs(analytic[k]), std::fabs(numeric), kFloor});
        err = std::fabs(analytic[k] - numeric) / denom;
        const double fwd = (fp - f0) / eps, bwd = (f0 - fm) / eps;
        const bool kink = std::fabs(fwd - bwd) > 1e-4 * std::max({std::fabs(fwd), std::fabs(bwd), kFloor});
        if (!kink || err <= kGradTolerance) break;
      }
      worst = std::max(worst, err);
    }
  }
  return worst;
}

namespace {

template <typename Fn>
void run_trials(Results& out, int trials, const char* name, Fn&& trial) {
  Rng rng(fnv1a64(name));
  GradcheckResult r{name, trials, 0.0};
  for (int t = 0; t < trials; ++t) r.worst = std::max(r.worst, trial(rng));
  out.push_back(r);
}

nn::Shape random_shape(Rng& rng, std::size_t rank, std::size_t lo = 1, std::size_t hi = 4) {
  std::vector<std::size_t> d(rank);
  for (auto& v : d) v = pick(rng, lo, hi);
  return nn::Shape(d);
}


void group_1(Results& out, int trials) {
  run_trials(out, trials, "add", [](Rng& rng) {
    const auto s = random_shape(rng, 3);
    return gradcheck([](const auto& in) { return nn::add(in[0], in[1]); }, {rand_tensor(rng, s), rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "sub", [](Rng& rng) {
    const auto s = random_shape(rng, 2);
    return gradcheck([](const auto& in) { return nn::sub(in[0], in[1]); }, {rand_tensor(rng, s), rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "mul", [](Rng& rng) {
    const auto s = random_shape(rng, 3);
    return gradcheck([](const auto& in) { return nn::mul(in[0], in[1]); }, {rand_tensor(rng, s), rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "mul-self", [](Rng& rng) {
    const auto s = random_shape(rng, 2);
    return gradcheck([](const auto& in) { return nn::mul(in[0], in[0]); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "scale", [](Rng& rng) {
    const double k = rng.uniform(-3, 3);
    return gradcheck([k](const auto& in) { return nn::scale(in[0], k); }, {rand_tensor(rng, random_shape(rng, 2))}, rng);
  });
}

void group_2(Results& out, int trials) {
  run_trials(out, trials, "sum", [](Rng& rng) {
    return gradcheck([](const auto& in) { return nn::sum(in[0]); }, {rand_tensor(rng, random_shape(rng, 3))}, rng);
  });
  run_trials(out, trials, "mean", [](Rng& rng) {
    return gradcheck([](const auto& in) { return nn::mean(in[0]); }, {rand_tensor(rng, random_shape(rng, 3))}, rng);
  });
  run_trials(out, trials, "reduce_mean", [](Rng& rng) {
    const auto s = random_shape(rng, 3);
    const std::size_t axis = rng.below(3);
    return gradcheck([axis](const auto& in) { return nn::reduce_mean(in[0], axis); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "reduce_max", [](Rng& rng) {
    const auto s = random_shape(rng, 3);
    const std::size_t axis = rng.below(3);
    return gradcheck([axis](const auto& in) { return nn::reduce_max(in[0], axis); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "global_pool", [](Rng& rng) {
    const auto s = random_shape(rng, 4);
    const auto kind = rng.below(2) ? nn::PoolKind::Max : nn::PoolKind::Mean;
    return gradcheck([kind](const auto& in) { return nn::global_pool(in[0], kind); }, {rand_tensor(rng, s)}, rng);
  });
}

void group_3(Results& out, int trials) {
  run_trials(out, trials, "relu", [](Rng& rng) {
    return gradcheck([](const auto& in) { return nn::relu(in[0]); }, {rand_tensor(rng, random_shape(rng, 3))}, rng);
  });
  run_trials(out, trials, "gelu", [](Rng& rng) {
    return gradcheck([](const auto& in) { return nn::gelu(in[0]); }, {rand_tensor(rng, random_shape(rng, 3), -3, 3)}, rng);
  });
  run_trials(out, trials, "sigmoid", [](Rng& rng) {
    return gradcheck([](const auto& in) { return nn::sigmoid(in[0]); }, {rand_tensor(rng, random_shape(rng, 3), -4, 4)}, rng);
  });
  run_trials(out, trials, "softmax", [](Rng& rng) {
    const auto s = random_shape(rng, 3, 1, 5);
    const std::size_t axis = rng.below(3);
    return gradcheck([axis](const auto& in) { return nn::softmax(in[0], axis); }, {rand_tensor(rng, s, -2, 2)}, rng);
  });
}

void group_4(Results& out, int trials) {
  run_trials(out, trials, "reshape", [](Rng& rng) {
    const auto s = random_shape(rng, 3);
    const nn::Shape flat{s.numel()};
    return gradcheck([flat](const auto& in) { return nn::reshape(in[0], flat); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "transpose", [](Rng& rng) {
    const auto s = random_shape(rng, 4);
    const std::size_t a = rng.below(4), b = rng.below(4);
    return gradcheck([a, b](const auto& in) { return nn::transpose(in[0], a, b); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "concat", [](Rng& rng) {
    const std::size_t axis = rng.below(3);
    auto s1 = random_shape(rng, 3).dims();
    auto s2 = s1;
    s2[axis] = pick(rng, 1, 4);
    return gradcheck([axis](const auto& in) { return nn::concat(in, axis); },
                     {rand_tensor(rng, nn::Shape(s1)), rand_tensor(rng, nn::Shape(s2)), rand_tensor(rng, nn::Shape(s1))}, rng);
  });
  run_trials(out, trials, "slice", [](Rng& rng) {
    const auto s = random_shape(rng, 3, 2, 5);
    const std::size_t axis = rng.below(3);
    const std::size_t start = rng.below(s[axis]);
    const std::size_t len = pick(rng, 1, s[axis] - start);
    return gradcheck([=](const auto& in) { return nn::slice(in[0], axis, start, len); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "broadcast_batch", [](Rng& rng) {
    const nn::Shape s{1, pick(rng, 1, 3), pick(rng, 1, 3)};
    const std::size_t b = pick(rng, 1, 4);
    return gradcheck([b](const auto& in) { return nn::broadcast_batch(in[0], b); }, {rand_tensor(rng, s)}, rng);
  });
}

void group_5(Results& out, int trials) {
  run_trials(out, trials, "matmul", [](Rng& rng) {
    const std::size_t m = pick(rng, 1, 5), k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    return gradcheck([](const auto& in) { return nn::matmul(in[0], in[1]); },
                     {rand_tensor(rng, {m, k}), rand_tensor(rng, {k, n})}, rng);
  });
  run_trials(out, trials, "matmul-batched", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 3), m = pick(rng, 1, 4), k = pick(rng, 1, 4), n = pick(rng, 1, 4);
    return gradcheck([](const auto& in) { return nn::matmul(in[0], in[1]); },
                     {rand_tensor(rng, {b, m, k}), rand_tensor(rng, {b, k, n})}, rng);
  });
  run_trials(out, trials, "dense", [](Rng& rng) {
    const std::size_t m = pick(rng, 1, 3), t = pick(rng, 1, 3), in_f = pick(rng, 1, 6), out_f = pick(rng, 1, 5);
    if (rng.below(2)) {
      return gradcheck([](const auto& in) { return nn::dense(in[0], in[1], T64{}); },
                       {rand_tensor(rng, {m, t, in_f}), rand_tensor(rng, {out_f, in_f})}, rng);
    }
    return gradcheck([](const auto& in) { return nn::dense(in[0], in[1], in[2]); },
                     {rand_tensor(rng, {m, in_f}), rand_tensor(rng, {out_f, in_f}), rand_tensor(rng, {out_f})}, rng);
  });
}

void group_6(Results& out, int trials) {
  run_trials(out, trials, "conv2d", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), h = pick(rng, 3, 7), w = pick(rng, 3, 8);
    const std::size_t o = pick(rng, 1, 3), kh = pick(rng, 1, 3), kw = pick(rng, 1, 4);
    nn::Conv2dParams p;
    p.stride_h = pick(rng, 1, 2);
    p.stride_w = pick(rng, 1, 2);
    p.pad_top = rng.below(3);
    p.pad_bottom = rng.below(3);
    p.pad_left = rng.below(3);
    p.pad_right = rng.below(3);
    const bool with_bias = rng.below(2) == 1;
    std::vector<T64> in{rand_tensor(rng, {n, c, h, w}), rand_tensor(rng, {o, c, kh, kw})};
    if (with_bias) in.push_back(rand_tensor(rng, {o}));
    return gradcheck([p, with_bias](const auto& v) { return nn::conv2d(v[0], v[1], with_bias ? v[2] : T64{}, p); }, in, rng);
  });
  run_trials(out, trials, "conv2d-pointwise", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 4), h = pick(rng, 1, 4), w = pick(rng, 1, 4), o = pick(rng, 1, 3);
    return gradcheck([](const auto& v) { return nn::conv2d(v[0], v[1], v[2], nn::Conv2dParams{}); },
                     {rand_tensor(rng, {n, c, h, w}), rand_tensor(rng, {o, c, 1, 1}), rand_tensor(rng, {o})}, rng);
  });
  run_trials(out, trials, "max_pool2d", [](Rng& rng) {
    const std::size_t kh = pick(rng, 1, 2), kw = pick(rng, 1, 2);
    const nn::Shape s{pick(rng, 1, 2), pick(rng, 1, 2), pick(rng, kh, 6), pick(rng, kw, 6)};
    return gradcheck([kh, kw](const auto& v) { return nn::max_pool2d(v[0], kh, kw); }, {rand_tensor(rng, s)}, rng);
  });
  run_trials(out, trials, "extract_patches", [](Rng& rng) {
    const std::size_t ph = pick(rng, 1, 3), pw = pick(rng, 1, 3);
    const nn::Shape s{pick(rng, 1, 2), pick(rng, 1, 2), pick(rng, ph, 7), pick(rng, pw, 7)};
    const std::size_t sh = pick(rng, 1, ph), sw = pick(rng, 1, pw);  // overlapping when stride < patch
    return gradcheck([=](const auto& v) { return nn::extract_patches(v[0], ph, pw, sh, sw); }, {rand_tensor(rng, s)}, rng);
  });
}

void group_7(Results& out, int trials) {
  run_trials(out, trials, "layer_norm", [](Rng& rng) {
    const std::size_t d = pick(rng, 2, 6);
    const nn::Shape s{pick(rng, 1, 3), pick(rng, 1, 3), d};
    return gradcheck([](const auto& v) { return nn::layer_norm(v[0], v[1], v[2]); },
                     {rand_tensor(rng, s, -2, 2), rand_tensor(rng, {d}), rand_tensor(rng, {d})}, rng);
  });
  run_trials(out, trials, "batch_norm-train", [](Rng& rng) {
    const std::size_t c = pick(rng, 1, 3);
    const nn::Shape s{pick(rng, 2, 3), c, pick(rng, 1, 3), pick(rng, 1, 3)};
    return gradcheck(
        [c](const auto& v) {
          nn::BatchNormStats<double> st{T64::zeros({c}), T64::full({c}, 1.0)};
          return nn::batch_norm(v[0], v[1], v[2], st, true);
        },
        {rand_tensor(rng, s, -2, 2), rand_tensor(rng, {c}), rand_tensor(rng, {c})}, rng);
  });
  run_trials(out, trials, "batch_norm-eval", [](Rng& rng) {
    const std::size_t c = pick(rng, 1, 3);
    const nn::Shape s{pick(rng, 1, 3), c, pick(rng, 1, 3)};
    const T64 rm = rand_tensor(rng, {c});
    const T64 rv = rand_tensor(rng, {c}, 0.5, 2.0);
    return gradcheck(
        [rm, rv](const auto& v) {
          nn::BatchNormStats<double> st{rm, rv};
          return nn::batch_norm(v[0], v[1], v[2], st, false);
        },
        {rand_tensor(rng, s), rand_tensor(rng, {c}), rand_tensor(rng, {c})}, rng);
  });
  run_trials(out, trials, "dropout", [](Rng& rng) {
    const double p = rng.uniform(0.1, 0.7);
    const std::uint64_t seed = rng.next_u64();
    return gradcheck([p, seed](const auto& v) { return nn::dropout(v[0], p, seed, true); },
                     {rand_tensor(rng, random_shape(rng, 2, 2, 6))}, rng);
  });
}

void group_8(Results& out, int trials) {
  run_trials(out, trials, "embedding_add", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 3), s = pick(rng, 1, 4), d = pick(rng, 1, 4);
    return gradcheck([](const auto& v) { return nn::embedding_add(v[0], v[1]); },
                     {rand_tensor(rng, {b, s, d}), rand_tensor(rng, {1, s, d})}, rng);
  });
  run_trials(out, trials, "attention", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 2), s = pick(rng, 1, 5), heads = pick(rng, 1, 3), dh = pick(rng, 1, 3);
    const nn::Shape sh{b, s, heads * dh};
    return gradcheck([heads](const auto& v) { return nn::scaled_dot_product_attention(v[0], v[1], v[2], heads); },
                     {rand_tensor(rng, sh, -2, 2), rand_tensor(rng, sh, -2, 2), rand_tensor(rng, sh)}, rng);
  });
  run_trials(out, trials, "bce_with_logits", [](Rng& rng) {
    const auto s = random_shape(rng, 2, 1, 5);
    std::vector<double> y(s.numel());
    for (auto& v : y) v = rng.below(2) ? 1.0 : 0.0;
    return gradcheck([](const auto& v) { return nn::bce_with_logits(v[0], v[1]); },
                     {rand_tensor(rng, s, -4, 4), T64::from_data(s, y)}, rng, {false, true});
  });
}

void group_9(Results& out, int trials) {
  run_trials(out, trials, "conv-net", [](Rng& rng) {
    const std::size_t n = 2, h = pick(rng, 4, 6), w = pick(rng, 4, 7), c1 = pick(rng, 1, 3), c2 = pick(rng, 1, 3),
                      tags = pick(rng, 1, 3);
    std::vector<double> y(n * tags);
    for (auto& v : y) v = rng.below(2) ? 1.0 : 0.0;
    const T64 targets = T64::from_data({n, tags}, y);
    return gradcheck(
        [targets, c2](const auto& v) {
          auto x = nn::relu(nn::conv2d(v[0], v[1], v[2], nn::Conv2dParams::uniform(1)));
          x = nn::max_pool2d(x, 2, 2);
          nn::BatchNormStats<double> st{T64::zeros({c2}), T64::full({c2}, 1.0)};
          x = nn::relu(nn::batch_norm(nn::conv2d(x, v[3], T64{}, nn::Conv2dParams::same(3, 3)), v[4], v[5], st, true));
          x = nn::global_pool(x, nn::PoolKind::Max);
          return nn::bce_with_logits(nn::dense(x, v[6], v[7]), targets);
        },
        {rand_tensor(rng, {n, 1, h, w}), rand_tensor(rng, {c1, 1, 3, 3}), rand_tensor(rng, {c1}),
         rand_tensor(rng, {c2, c1, 3, 3}), rand_tensor(rng, {c2}, 0.5, 1.5), rand_tensor(rng, {c2}),
         rand_tensor(rng, {tags, c2}), rand_tensor(rng, {tags})},
        rng);
  });
}

}  // namespace

std::vector<GradcheckResult> run_op_gradchecks(int trials) {
  Results out;
  group_1(out, trials);
  group_2(out, trials);
  group_3(out, trials);
  group_4(out, trials);
  group_5(out, trials);
  group_6(out, trials);
  group_7(out, trials);
  group_8(out, trials);
  group_9(out, trials);
  return out;
}

}  // namespace ccml::testing
