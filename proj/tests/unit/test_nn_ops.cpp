#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "ccml/error.hpp"
#include "ccml/nn/init.hpp"
#include "ccml/nn/ops.hpp"
#include "ccml/nn/optim.hpp"
#include "ccml/nn/schedule.hpp"
#include "ccml/simd/kernels.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace ccml;
using F = nn::Tensor<float>;
using D = nn::Tensor<double>;

namespace {

F rand_f(Rng& rng, const nn::Shape& s) { return F::from_data(s, testing::random_floats(rng, s.numel())); }

D to_double(const F& t) {
  return D::from_data(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace

TEST_CASE("conv2d and pooling shapes") {
  Rng rng(1);
  const F x = rand_f(rng, {1, 1, 128, 229});
  const F w = rand_f(rng, {4, 1, 3, 3});
  CHECK(nn::conv2d(x, w, F{}, nn::Conv2dParams::uniform(1)).shape() == nn::Shape{1, 4, 128, 229});
  CHECK(nn::max_pool2d(F::zeros({1, 3, 128, 228}), 2, 2).shape() == nn::Shape{1, 3, 64, 114});
  // floor((in + 2 pad - k) / stride) + 1
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t h = 3 + rng.below(20), k = 1 + rng.below(3), pad = rng.below(3), stride = 1 + rng.below(3);
    const auto y = nn::conv2d(F::zeros({1, 1, h, h}), F::zeros({1, 1, k, k}), F{}, nn::Conv2dParams::uniform(pad, stride));
    CHECK(y.dim(2) == (h + 2 * pad - k) / stride + 1);
  }
  const auto same = nn::conv2d(F::zeros({1, 1, 5, 186}), F::zeros({2, 1, 1, 128}), F{}, nn::Conv2dParams::same(1, 128));
  CHECK(same.shape() == nn::Shape{1, 2, 5, 186});
}

TEST_CASE("shape errors name the op") {
  const F a = F::zeros({2, 3});
  CHECK_THROWS_AS(nn::add(a, F::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(nn::matmul(a, F::zeros({2, 2})), ShapeError);
  CHECK_THROWS_AS(nn::conv2d(F::zeros({1, 2, 4, 4}), F::zeros({1, 3, 3, 3}), F{}, {}), ShapeError);
  CHECK_THROWS_AS(nn::max_pool2d(F::zeros({1, 1, 1, 4}), 2, 2), ShapeError);
  CHECK_THROWS_AS(nn::scaled_dot_product_attention(F::zeros({1, 2, 5}), F::zeros({1, 2, 5}), F::zeros({1, 2, 5}), 2),
                  ShapeError);
  try {
    nn::matmul(a, F::zeros({2, 2}));
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
}

TEST_CASE("softmax sums to one") {
  Rng rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    auto v = testing::random_floats(rng, n, -30, 30);
    const auto y = nn::softmax(F::from_data({n}, v), 0);
    double total = 0.0;
    for (float p : y.values()) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("backward analytic examples") {
  auto x = D::from_data({3}, {1, 2, 3}, true);
  nn::sum(nn::mul(x, x)).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{2, 4, 6});

  auto z = D::from_data({1}, {0.0}, true);
  nn::bce_with_logits(z, D::from_data({1}, {1.0})).backward();
  CHECK(z.grad()[0] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("backward on a detached tensor raises NoGraph") {
  const F x = F::from_data({2}, {1, 2});
  CHECK_THROWS_AS(nn::sum(x).backward(), NoGraph);
  auto y = F::from_data({2}, {1, 2}, true);
  CHECK_THROWS_AS(nn::sum(y).detach().backward(), NoGraph);
  {
    nn::NoGradGuard guard;
    CHECK_THROWS_AS(nn::sum(y).backward(), NoGraph);
  }
  CHECK_THROWS_AS(nn::relu(y).backward(), ShapeError);
}

TEST_CASE("gradients accumulate until cleared") {
  auto w = F::from_data({1}, {3}, true);
  nn::sum(nn::scale(w, 2.0f)).backward();
  nn::sum(nn::scale(w, 2.0f)).backward();
  CHECK(w.grad()[0] == 4.0f);
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("check-finite mode raises NumericFault") {
  nn::set_check_finite(true);
  CHECK_THROWS_AS(nn::scale(F::from_data({1}, {1e30f}), 1e30f), NumericFault);
  CHECK_NOTHROW(nn::scale(F::from_data({1}, {1.0f}), 2.0f));
  nn::set_check_finite(false);
  CHECK_NOTHROW(nn::scale(F::from_data({1}, {1e30f}), 1e30f));
}

TEST_CASE("dropout extremes") {
  Rng rng(4);
  const F x = rand_f(rng, {4, 33});
  const auto same = nn::dropout(x, 0.0, 9, true);
  CHECK(same.values() == x.values());
  const auto zero = nn::dropout(x, 1.0, 9, true);
  for (float v : zero.values()) CHECK(v == 0.0f);
  CHECK(nn::dropout(x, 0.5, 9, false).values() == x.values());
  // Kept units are scaled so the expectation is preserved.
  const auto half = nn::dropout(F::full({20000}, 1.0f), 0.5, 3, true);
  const double m = std::accumulate(half.values().begin(), half.values().end(), 0.0) / 20000.0;
  CHECK(m == doctest::Approx(1.0).epsilon(0.03));
  CHECK(nn::dropout(x, 0.5, 9, true).values() == nn::dropout(x, 0.5, 9, true).values());
  CHECK_THROWS_AS(nn::dropout(x, 1.5, 9, true), ConfigError);
}

TEST_CASE("batch_norm eval is a fixed affine map and train updates running stats") {
  Rng rng(5);
  const F x = rand_f(rng, {3, 2, 4});
  const F g = F::from_data({2}, {1.5f, -0.5f});
  const F b = F::from_data({2}, {0.1f, 0.2f});
  nn::BatchNormStats<float> st{F::from_data({2}, {0.3f, -0.1f}), F::from_data({2}, {2.0f, 0.5f})};
  const auto y1 = nn::batch_norm(x, g, b, st, false);
  const auto y2 = nn::batch_norm(x, g, b, st, false);
  CHECK(y1.values() == y2.values());
  CHECK(st.running_mean.values() == std::vector<float>{0.3f, -0.1f});
  // Affine: f(x1) - f(x0) is linear in (x1 - x0).
  const F x2 = nn::scale(x, 2.0f);
  const auto y0 = nn::batch_norm(F::zeros(x.shape()), g, b, st, false);
  const auto y3 = nn::batch_norm(x2, g, b, st, false);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(y3.values()[i] - y0.values()[i] == doctest::Approx(2.0 * (y1.values()[i] - y0.values()[i])).epsilon(1e-5));
  }

  nn::BatchNormStats<float> fresh{F::zeros({2}), F::full({2}, 1.0f)};
  nn::batch_norm(x, g, b, fresh, true);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t l = 0; l < 4; ++l) m += x.values()[(n * 2 + c) * 4 + l];
    m /= 12.0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t l = 0; l < 4; ++l) v += std::pow(x.values()[(n * 2 + c) * 4 + l] - m, 2);
    CHECK(fresh.running_mean.values()[c] == doctest::Approx(0.1 * m).epsilon(1e-6));
    CHECK(fresh.running_var.values()[c] == doctest::Approx(0.9 + 0.1 * v / 11.0).epsilon(1e-6));
  }
}

TEST_CASE("float ops agree with the double build") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const F x = rand_f(rng, {2, 3, 9, 11});
    const F w = rand_f(rng, {5, 3, 3, 3});
    const F bias = rand_f(rng, {5});
    const auto p = nn::Conv2dParams::uniform(1 + rng.below(2), 1 + rng.below(2));
    const auto yf = nn::conv2d(x, w, bias, p);
    const auto yd = nn::conv2d(to_double(x), to_double(w), to_double(bias), p);
    for (std::size_t i = 0; i < yf.numel(); ++i) CHECK(yf.values()[i] == doctest::Approx(yd.values()[i]).epsilon(1e-5));

    const F q = rand_f(rng, {2, 7, 8}), k = rand_f(rng, {2, 7, 8}), v = rand_f(rng, {2, 7, 8});
    const auto af = nn::scaled_dot_product_attention(q, k, v, 2);
    const auto ad = nn::scaled_dot_product_attention(to_double(q), to_double(k), to_double(v), 2);
    for (std::size_t i = 0; i < af.numel(); ++i) CHECK(af.values()[i] == doctest::Approx(ad.values()[i]).epsilon(1e-5));
  }
}

TEST_CASE("forward results do not depend on the kernel ISA beyond rounding") {
  Rng rng(7);
  const F x = rand_f(rng, {2, 4, 12, 20});
  const F w = rand_f(rng, {6, 4, 3, 3});
  const auto original = simd::kernels().isa;
  simd::force_isa(simd::Isa::Scalar);
  const auto ref = nn::conv2d(x, w, F{}, nn::Conv2dParams::uniform(1));
  simd::force_isa(original);
  const auto fast = nn::conv2d(x, w, F{}, nn::Conv2dParams::uniform(1));
  for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(fast.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-5));
}

TEST_CASE("transpose and extract_patches layouts") {
  const F x = F::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(nn::transpose(x, 0, 1).values() == std::vector<float>{1, 4, 2, 5, 3, 6});
  std::vector<float> img(4 * 6);
  std::iota(img.begin(), img.end(), 0.0f);
  const auto p = nn::extract_patches(F::from_data({1, 1, 4, 6}, img), 2, 3);
  CHECK(p.shape() == nn::Shape{1, 4, 6});
  CHECK(std::vector<float>(p.values().begin(), p.values().begin() + 12) ==
        std::vector<float>{0, 1, 2, 6, 7, 8, 3, 4, 5, 9, 10, 11});
  CHECK(std::vector<float>(p.values().begin() + 18, p.values().end()) == std::vector<float>{15, 16, 17, 21, 22, 23});
}

TEST_CASE("SGD and Adam single-step rules") {
  auto p = F::from_data({1}, {0.0f}, true);
  nn::Sgd<float> sgd({p}, 0.1, 0.0);
  p.mutable_grad();
  nn::sum(p).backward();
  sgd.step();
  CHECK(p.values()[0] == doctest::Approx(-0.1));
  CHECK(sgd.step_count() == 1);

  for (double g : {3.0, -0.001, 250.0}) {
    auto w = D::from_data({1}, {1.0}, true);
    nn::Adam<double> adam({w}, 1e-3);
    nn::sum(nn::scale(w, g)).backward();
    adam.step();
    CHECK(std::fabs(w.values()[0] - 1.0) == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK((w.values()[0] < 1.0) == (g > 0));
  }
}

TEST_CASE("momentum follows v = mu v + g") {
  auto p = D::from_data({1}, {0.0}, true);
  nn::Sgd<double> sgd({p}, 0.5, 0.9);
  for (int i = 0; i < 3; ++i) {
    sgd.zero_grad();
    nn::sum(p).backward();
    sgd.step();
  }
  // v: 1, 1.9, 2.71 -> p = -0.5 * (1 + 1.9 + 2.71)
  CHECK(p.values()[0] == doctest::Approx(-2.805).epsilon(1e-12));
}

TEST_CASE("optimizers converge on a quadratic") {
  Rng rng(8);
  const auto target = testing::random_doubles(rng, 5);
  const D star = D::from_data({5}, target);
  for (int kind = 0; kind < 2; ++kind) {
    auto w = D::zeros({5}, true);
    std::unique_ptr<nn::Optimizer<double>> opt;
    if (kind == 0) opt = std::make_unique<nn::Sgd<double>>(std::vector<D>{w}, 0.1, 0.5);
    else opt = std::make_unique<nn::Adam<double>>(std::vector<D>{w}, 0.05);
    for (int step = 0; step < (kind == 0 ? 100 : 400); ++step) {
      opt->zero_grad();
      const auto d = nn::sub(w, star);
      nn::sum(nn::mul(d, d)).backward();
      opt->step();
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < 5; ++i) dist += std::pow(w.values()[i] - target[i], 2);
    CHECK(std::sqrt(dist) < 1e-3);
  }
}

TEST_CASE("optimizer errors") {
  auto p = F::from_data({2}, {1, 2}, true);
  nn::Adam<float> adam({p}, 1e-3);
  CHECK_THROWS_AS(adam.step(), OptimizerError);
  CHECK_THROWS_AS(adam.set_learning_rate(0.0), OptimizerError);
  CHECK_THROWS_AS(nn::Sgd<float>({p}, -1.0), OptimizerError);
  // Frozen parameters are skipped rather than reported.
  auto frozen = F::from_data({1}, {5}, false);
  nn::Sgd<float> sgd({frozen}, 0.1);
  CHECK_NOTHROW(sgd.step());
  CHECK(frozen.values()[0] == 5.0f);
}

TEST_CASE("training steps are bitwise deterministic") {
  auto run = [] {
    Rng rng(12);
    auto w = F::zeros({4, 1, 3, 3}, true);
    nn::init::he_uniform(w, 9, rng);
    auto d = F::zeros({2, 4}, true);
    nn::init::he_uniform(d, 4, rng);
    const F x = rand_f(rng, {3, 1, 8, 8});
    const F y = F::from_data({3, 2}, {1, 0, 0, 1, 1, 1});
    nn::Adam<float> opt({w, d}, 1e-2);
    for (int s = 0; s < 5; ++s) {
      opt.zero_grad();
      auto h = nn::global_pool(nn::relu(nn::conv2d(x, w, F{}, nn::Conv2dParams::uniform(1))), nn::PoolKind::Mean);
      nn::bce_with_logits(nn::dense(h, d, F{}), y).backward();
      opt.step();
    }
    auto out = w.values();
    out.insert(out.end(), d.values().begin(), d.values().end());
    return out;
  };
  const auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("learning-rate schedules") {
  CHECK(nn::ast_learning_rate(1) == 1e-5);
  CHECK(nn::ast_learning_rate(5) == 1e-5);
  CHECK(nn::ast_learning_rate(6) == doctest::Approx(8.5e-6).epsilon(1e-12));
  CHECK(nn::ast_learning_rate(10) == doctest::Approx(1e-5 * std::pow(0.85, 5)).epsilon(1e-12));
  CHECK(nn::ast_learning_rate(10) == doctest::Approx(4.437e-6).epsilon(1e-3));

  const nn::LrSchedule mixed{nn::SchedulePolicy::MixedAdamSgd, 1e-4, 200};
  CHECK(mixed.at(1).optimizer == nn::OptimizerKind::Adam);
  CHECK(mixed.at(100).optimizer == nn::OptimizerKind::Adam);
  CHECK(mixed.at(101).optimizer == nn::OptimizerKind::Sgd);
  CHECK(mixed.at(101).momentum == 0.9);
  CHECK(mixed.at(160).learning_rate == 1e-4);
  CHECK(mixed.at(161).learning_rate == doctest::Approx(2e-5));
  CHECK(nn::parse_policy("mixed_adam_sgd") == nn::SchedulePolicy::MixedAdamSgd);
  CHECK_THROWS_AS(nn::parse_policy("nope"), ConfigError);
  CHECK_THROWS_AS(mixed.at(0), ConfigError);
}
