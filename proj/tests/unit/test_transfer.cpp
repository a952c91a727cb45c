#include <cstring>

#include "ccml/error.hpp"
#include "ccml/transfer/transfer.hpp"
#include "doctest.h"
#include "test_support.hpp"
#include "toy_data.hpp"

using namespace ccml;
using namespace ccml::transfer;

namespace {

constexpr std::size_t kFrames = 32;
const models::Arch kArchs[] = {models::Arch::VggIsh, models::Arch::Musicnn, models::Arch::Ast};

models::ModelConfig tiny(models::Arch arch, std::size_t n_tags) { return models::ModelConfig::desk(arch, n_tags, {0.53, kFrames}); }

models::ModelCheckpoint source_checkpoint(models::Arch arch, std::size_t n_tags, std::uint64_t seed = 3) {
  auto m = models::build_model<float>(tiny(arch, n_tags), seed);
  std::vector<std::string> vocab;
  for (std::size_t k = 0; k < n_tags; ++k) vocab.push_back("s" + std::to_string(k));
  return models::capture(*m, vocab, {"source-set", 4, "", "exp"});
}

bool same_bits(const std::vector<float>& a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("policy names") {
  CHECK(parse_freeze_policy("output") == FreezePolicy::OutputOnly);
  CHECK(parse_freeze_policy("ALL") == FreezePolicy::All);
  CHECK(policy_name(FreezePolicy::OutputOnly) == "output");
  CHECK_THROWS_AS(parse_freeze_policy("half"), ConfigError);
}

TEST_CASE("initialize_from_source: backbone copied, output layer fresh") {
  for (auto arch : kArchs) {
    CAPTURE(models::arch_name(arch));
    const auto src = source_checkpoint(arch, 30);
    auto target = initialize_from_source(src, tiny(arch, 20), 11);
    std::size_t outputs = 0;
    for (const auto& e : target->params().entries()) {
      const bool out = models::is_output_layer(arch, e.spec.name);
      const auto& s = src.tensor(e.spec.name);
      if (out) {
        ++outputs;
        CHECK(e.spec.shape[0] == 20);
        CHECK(s.shape[0] == 30);
      } else {
        CHECK(same_bits(s.data, e.tensor.values()));
      }
    }
    CHECK(outputs == 2);
    CHECK(changed_backbone_tensors(*target, src).empty());

    // Same vocabulary size: the output layer is still redrawn.
    auto same = initialize_from_source(src, tiny(arch, 30), 11);
    const auto weight = models::output_layer_prefix(arch) + ".weight";
    CHECK_FALSE(same_bits(src.tensor(weight).data, same->params()[weight].values()));

    // Idempotent up to the seeded output layer.
    auto again = initialize_from_source(src, tiny(arch, 20), 11);
    for (std::size_t i = 0; i < target->params().entries().size(); ++i) {
      CHECK(target->params().entries()[i].tensor.values() == again->params().entries()[i].tensor.values());
    }

    // Manifests differ only in the output layer.
    const auto a = models::describe(tiny(arch, 30)), b = models::describe(tiny(arch, 20));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      if (!models::is_output_layer(arch, a[i].name)) CHECK(a[i].shape == b[i].shape);
    }
  }
}

TEST_CASE("initialize_from_source: mismatches raise TransferError") {
  const auto src = source_checkpoint(models::Arch::Musicnn, 10);
  auto wide = tiny(models::Arch::Musicnn, 10);
  wide.width_scale = 1.0 / 8.0;
  CHECK_THROWS_AS(initialize_from_source(src, wide, 1), TransferError);
  CHECK_THROWS_AS(initialize_from_source(src, tiny(models::Arch::VggIsh, 10), 1), TransferError);
  auto fewer_mels = tiny(models::Arch::Musicnn, 10);
  fewer_mels.n_mels = 96;  // vertical filter heights follow n_mels
  try {
    initialize_from_source(src, fewer_mels, 1);
    FAIL("expected TransferError");
  } catch (const TransferError& e) {
    CHECK(std::string(e.what()).find("front.vert1.conv.weight") != std::string::npos);
  }
}

TEST_CASE("OutputOnly keeps the backbone bit-identical; All moves it") {
  const auto vocab = testing::toy_vocabulary(3);
  const auto tr = testing::make_toy_set(21, 24, 3, 128, kFrames * 2);
  const auto va = testing::make_toy_set(22, 12, 3, 128, kFrames * 2);
  for (auto arch : kArchs) {
    CAPTURE(models::arch_name(arch));
    const auto src = source_checkpoint(arch, 5);
    auto cfg = train::TrainConfig::for_arch(tiny(arch, 3));
    cfg.policy = nn::SchedulePolicy::AdamConstant;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 2;

    auto frozen = initialize_from_source(src, cfg.model, 4);
    const auto out_before = frozen->params()[models::output_layer_prefix(arch) + ".weight"].values();
    const auto report = finetune(*frozen, src, FreezePolicy::OutputOnly, tr.set, va.set, vocab, cfg);
    CHECK(report.epochs.size() == 2);
    CHECK(changed_backbone_tensors(*frozen, src).empty());
    CHECK(frozen->params()[models::output_layer_prefix(arch) + ".weight"].values() != out_before);
    // Trainability flags are restored afterwards.
    for (const auto& e : frozen->params().entries()) CHECK(e.tensor.requires_grad() == e.spec.trainable);

    auto full = initialize_from_source(src, cfg.model, 4);
    finetune(*full, src, FreezePolicy::All, tr.set, va.set, vocab, cfg);
    CHECK_FALSE(changed_backbone_tensors(*full, src).empty());
  }
}

TEST_CASE("plans and registry records") {
  TransferPlan p;
  p.source_checkpoint = "runs/src.ckpt";
  p.target_manifest = "data/tgt/manifest.jsonl";
  p.target_dataset_id = "tgt";
  p.policy = FreezePolicy::All;
  p.train = train::TrainConfig::for_arch(tiny(models::Arch::Ast, 6));
  CHECK(TransferPlan::from_json(p.to_json()).to_json() == p.to_json());

  const auto src = source_checkpoint(models::Arch::VggIsh, 4);
  eval::EvalReport rep;
  rep.macro_roc_auc = 0.8125;
  rep.macro_pr_auc = 0.5;
  const auto r = make_run_record(src, "tgt", FreezePolicy::OutputOnly, 9, rep, "exp", "abc");
  CHECK(r.model == "vggish");
  CHECK(r.source == "source-set");
  CHECK(r.roc_auc_pct == 81.25);
  const auto dir = testing::scratch_dir("registry");
  analysis::append_run_record(dir / "runs.jsonl", r);
  analysis::append_run_record(dir / "runs.jsonl", r);
  const auto back = analysis::load_registry(dir / "runs.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].to_json() == r.to_json());
  std::filesystem::remove_all(dir);
}
