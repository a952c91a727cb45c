#include <cmath>
#include <limits>

#include "ccml/error.hpp"
#include "ccml/nn/optim.hpp"
#include "ccml/train/trainer.hpp"
#include "doctest.h"
#include "toy_data.hpp"

using namespace ccml;
using namespace ccml::train;

namespace {

constexpr std::size_t kFrames = 32;

TrainConfig tiny_config(models::Arch arch, std::size_t n_tags) {
  auto cfg = TrainConfig::for_arch(models::ModelConfig::desk(arch, n_tags, {0.53, kFrames}));
  cfg.policy = nn::SchedulePolicy::AdamConstant;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 3;
  cfg.seed = 5;
  return cfg;
}

std::vector<std::vector<float>> params_of(const models::Model<float>& m) {
  std::vector<std::vector<float>> out;
  for (const auto& e : m.params().entries()) out.push_back(e.tensor.values());
  return out;
}

}  // namespace

TEST_CASE("TrainConfig presets follow the per-architecture recipes") {
  const auto v = TrainConfig::for_arch(models::ModelConfig::full(models::Arch::VggIsh, 50));
  CHECK(v.batch_size == 16);
  CHECK(v.max_epochs == 200);
  CHECK(v.learning_rate == 1e-4);
  CHECK(v.policy == nn::SchedulePolicy::MixedAdamSgd);
  const auto m = TrainConfig::for_arch(models::ModelConfig::full(models::Arch::Musicnn, 50));
  CHECK(m.batch_size == 16);
  CHECK(m.max_epochs == 50);
  const auto a = TrainConfig::for_arch(models::ModelConfig::full(models::Arch::Ast, 50));
  CHECK(a.batch_size == 12);
  CHECK(a.policy == nn::SchedulePolicy::AstAdamDecay);
  CHECK(a.learning_rate == 1e-5);

  auto c = tiny_config(models::Arch::Musicnn, 4);
  c.patience = 3;
  c.eval_train = true;
  c.stop_at_train_roc_auc = 0.9;
  CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(models::Arch::VggIsh, 4);
  c.max_epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("one clip, one tag: the loss drops below 0.05 within 50 epochs") {
  auto cfg = tiny_config(models::Arch::VggIsh, 1);
  cfg.max_epochs = 50;
  const auto toy = testing::make_toy_set(1, 1, 1, 128, kFrames, 1.0);
  auto model = models::build_model<float>(cfg.model, init_seed(cfg));
  const auto report = fit(*model, toy.set, toy.set, testing::toy_vocabulary(1), cfg);
  REQUIRE(report.epochs.size() == 50);
  CHECK(report.epochs.back().loss < 0.05);
}

TEST_CASE("epochs are recorded contiguously and the best-validation epoch is restored") {
  auto cfg = tiny_config(models::Arch::VggIsh, 4);
  cfg.max_epochs = 6;
  const auto tr = testing::make_toy_set(2, 48, 4, 128, kFrames * 2);
  const auto va = testing::make_toy_set(3, 24, 4, 128, kFrames * 2);
  const auto vocab = testing::toy_vocabulary(4);
  auto model = models::build_model<float>(cfg.model, init_seed(cfg));
  const auto report = fit(*model, tr.set, va.set, vocab, cfg);
  REQUIRE(report.epochs.size() == 6);
  std::size_t best = 1;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(report.epochs[i].epoch == i + 1);
    if (report.epochs[i].valid_roc_auc > report.epochs[best - 1].valid_roc_auc) best = i + 1;
  }
  CHECK(report.best_epoch == best);
  CHECK(report.best_valid_roc_auc == report.epochs[best - 1].valid_roc_auc);
  // Re-scoring the restored model reproduces the selected epoch's number.
  CHECK(eval::evaluate_features(*model, va.set.entries, va.set.mels, vocab).macro_roc_auc ==
        report.epochs[best - 1].valid_roc_auc);
  CHECK(TrainReport::from_json(report.to_json()).to_json() == report.to_json());
}

TEST_CASE("same seed, same run; different seed, different run") {
  const auto tr = testing::make_toy_set(4, 40, 3, 128, kFrames * 3);
  const auto va = testing::make_toy_set(5, 16, 3, 128, kFrames * 3);
  const auto vocab = testing::toy_vocabulary(3);
  for (auto arch : {models::Arch::VggIsh, models::Arch::Musicnn, models::Arch::Ast}) {
    CAPTURE(models::arch_name(arch));
    auto cfg = tiny_config(arch, 3);
    cfg.max_epochs = 2;
    auto run = [&](std::uint64_t seed) {
      auto c = cfg;
      c.seed = seed;
      auto model = models::build_model<float>(c.model, init_seed(c));
      const auto r = fit(*model, tr.set, va.set, vocab, c);
      return std::make_pair(r.to_json().dump(), params_of(*model));
    };
    const auto a = run(9), b = run(9), c = run(10);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first != c.first);
  }
}

TEST_CASE("loss is non-increasing on a single fixed batch") {
  // One chunk-length recording per example, no dropout: every epoch sees the
  // same batch, so only the parameters change between epochs.
  auto cfg = tiny_config(models::Arch::VggIsh, 3);
  cfg.model.vggish.dropout = 0.0;
  cfg.max_epochs = 15;
  cfg.learning_rate = 1e-4;
  const auto toy = testing::make_toy_set(6, 16, 3, 128, kFrames);
  auto model = models::build_model<float>(cfg.model, init_seed(cfg));
  const auto report = fit(*model, toy.set, toy.set, testing::toy_vocabulary(3), cfg);
  for (std::size_t i = 1; i < report.epochs.size(); ++i) CHECK(report.epochs[i].loss <= report.epochs[i - 1].loss * 1.05);
  CHECK(report.epochs.back().loss < report.epochs.front().loss);

  // Plain SGD with a small step on the same batch.
  auto m = models::build_model<float>(cfg.model, 3);
  nn::Sgd<float> sgd(m->params().trainable(), 0.05);
  std::vector<float> x, y;
  for (std::size_t i = 0; i < toy.set.size(); ++i) {
    x.insert(x.end(), toy.set.mels[i].values.data.begin(), toy.set.mels[i].values.data.end());
    y.insert(y.end(), toy.set.targets[i].begin(), toy.set.targets[i].end());
  }
  double prev = std::numeric_limits<double>::infinity();
  int increases = 0;
  for (int step = 0; step < 20; ++step) {
    models::ForwardOptions fo;
    fo.training = true;
    const auto loss = nn::bce_with_logits(m->forward(nn::Tensor<float>::from_data({16, 1, 128, kFrames}, x), fo),
                                          nn::Tensor<float>::from_data({16, 3}, y));
    const double v = loss.item();
    if (v > prev * 1.05) ++increases;
    prev = v;
    sgd.zero_grad();
    loss.backward();
    sgd.step();
  }
  CHECK(increases == 0);
}

TEST_CASE("early stopping, hooks and budgets") {
  auto cfg = tiny_config(models::Arch::VggIsh, 2);
  cfg.max_epochs = 50;
  cfg.patience = 2;
  const auto tr = testing::make_toy_set(7, 20, 2, 128, kFrames);
  const auto va = testing::make_toy_set(8, 10, 2, 128, kFrames);
  const auto vocab = testing::toy_vocabulary(2);
  auto model = models::build_model<float>(cfg.model, 1);
  const auto r = fit(*model, tr.set, va.set, vocab, cfg);
  if (r.stop_reason == "patience") CHECK(r.epochs.size() == r.best_epoch + 2);
  else CHECK(r.epochs.size() == 50);

  cfg.patience = 0;
  auto m2 = models::build_model<float>(cfg.model, 1);
  const auto h = fit(*m2, tr.set, va.set, vocab, cfg, false, [](const EpochRecord& e) { return e.epoch < 3; });
  CHECK(h.epochs.size() == 3);
  CHECK(h.stop_reason == "hook");

  cfg.wall_budget_sec = 1e-9;
  auto m3 = models::build_model<float>(cfg.model, 1);
  const auto b = fit(*m3, tr.set, va.set, vocab, cfg);
  CHECK(b.epochs.size() == 1);
  CHECK(b.stop_reason == "budget");
}

TEST_CASE("error paths") {
  auto cfg = tiny_config(models::Arch::VggIsh, 2);
  const auto tr = testing::make_toy_set(9, 8, 2, 128, kFrames);
  const auto vocab = testing::toy_vocabulary(2);
  auto model = models::build_model<float>(cfg.model, 1);
  CHECK_THROWS_AS(fit(*model, tr.set, LabeledSet{}, vocab, cfg), DataError);
  CHECK_THROWS_AS(fit(*model, LabeledSet{}, tr.set, vocab, cfg), DataError);
  CHECK_THROWS_AS(fit(*model, tr.set, tr.set, testing::toy_vocabulary(3), cfg), VocabError);

  model->params()["fc2.bias"].data()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    fit(*model, tr.set, tr.set, vocab, cfg);
    FAIL("expected TrainingFault");
  } catch (const TrainingFault& e) {
    CHECK(std::string(e.what()).find("epoch 1, step 1") != std::string::npos);
  }
}

TEST_CASE("validation: chance level and memorization") {
  const auto vocab = testing::toy_vocabulary(4);
  const auto va = testing::make_toy_set(10, 120, 4, 128, kFrames, 0.5);
  auto cfg = tiny_config(models::Arch::VggIsh, 4);
  // Random weights score near chance.
  auto model = models::build_model<float>(cfg.model, 77);
  const auto r = eval::evaluate_features(*model, va.set.entries, va.set.mels, vocab);
  CHECK(r.macro_roc_auc > 0.3);
  CHECK(r.macro_roc_auc < 0.7);
  // A model fitted on a small set ranks that set almost perfectly.
  const auto tr = testing::make_toy_set(11, 32, 4, 128, kFrames, 0.5);
  cfg.max_epochs = 25;
  cfg.eval_train = true;
  cfg.stop_at_train_roc_auc = 0.995;
  auto fitted = models::build_model<float>(cfg.model, 1);
  fit(*fitted, tr.set, tr.set, vocab, cfg);
  CHECK(eval::evaluate_features(*fitted, tr.set.entries, tr.set.mels, vocab).macro_roc_auc >= 0.99);
}
