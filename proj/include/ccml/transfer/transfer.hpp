#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "ccml/analysis/registry.hpp"
#include "ccml/train/trainer.hpp"

namespace ccml::transfer {

enum class FreezePolicy { OutputOnly, All };

/// "output" / "all".
std::string_view policy_name(FreezePolicy p) noexcept;
/// Accepts "output", "output_only", "all". ConfigError otherwise.
FreezePolicy parse_freeze_policy(std::string_view name);

/// One grid cell: fine-tune the source checkpoint on the target dataset.
struct TransferPlan {
  std::filesystem::path source_checkpoint;
  std::filesystem::path target_manifest;
  std::string target_dataset_id;
  FreezePolicy policy = FreezePolicy::OutputOnly;
  /// Target-side training settings; model.n_tags is the target vocabulary size.
  train::TrainConfig train;

  Json to_json() const;
  static TransferPlan from_json(const Json& j);
};

/// Target model whose non-output tensors are copied bitwise from `source` and
/// whose output layer is drawn from `seed`. `target` must describe the same
/// architecture with the target's tag count. TransferError naming the layer on
/// any shape mismatch, and on differing architecture or width_scale.
std::unique_ptr<models::Model<float>> initialize_from_source(const models::ModelCheckpoint& source,
                                                             const models::ModelConfig& target, std::uint64_t seed);

/// Fine-tunes `model` in place. OutputOnly trains only the output layer with
/// batch-norm statistics frozen and afterwards verifies that every other
/// tensor still equals `source` bit for bit (TransferError otherwise).
train::TrainReport finetune(models::Model<float>& model, const models::ModelCheckpoint& source, FreezePolicy policy,
                            const train::LabeledSet& train_set, const train::LabeledSet& valid_set,
                            const data::TagVocabulary& vocab, const train::TrainConfig& cfg);

/// Names of tensors that differ from `source` outside the output layer.
std::vector<std::string> changed_backbone_tensors(const models::Model<float>& model,
                                                  const models::ModelCheckpoint& source);

/// Loads features, initializes from `source` (output layer seeded by
/// train::init_seed(cfg)) and fine-tunes. The checkpoint's provenance names
/// the source dataset.
train::TrainResult run_transfer(const models::ModelCheckpoint& source, const data::DatasetManifest& target,
                                const data::TagVocabulary& vocab, FreezePolicy policy, const train::TrainConfig& cfg,
                                const data::FeatureOptions& opt, const std::string& experiment_id = {});

/// Registry record for a finished cell, scores in percent.
analysis::RunRecord make_run_record(const models::ModelCheckpoint& source, const std::string& target_dataset_id,
                                    FreezePolicy policy, std::uint64_t seed, const eval::EvalReport& report,
                                    const std::string& experiment_id, const std::string& checkpoint_id);

}  // namespace ccml::transfer
