#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ccml/data/features.hpp"
#include "ccml/data/vocabulary.hpp"
#include "ccml/eval/evaluate.hpp"
#include "ccml/models/checkpoint.hpp"
#include "ccml/nn/schedule.hpp"

namespace ccml::train {

struct TrainConfig {
  models::ModelConfig model;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  nn::SchedulePolicy policy = nn::SchedulePolicy::MixedAdamSgd;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a validation improvement (0: off).
  std::size_t patience = 0;
  /// Wall-clock limit in seconds, checked between epochs (0: off).
  double wall_budget_sec = 0.0;
  /// Also score the train split after every epoch.
  bool eval_train = false;
  /// Stop once the train macro ROC-AUC reaches this value (needs eval_train).
  std::optional<double> stop_at_train_roc_auc;

  /// Defaults per architecture: batch 16 / lr 1e-4 / mixed Adam-SGD with 200
  /// (VGG-ish) or 50 (Musicnn) epochs; AST batch 12, Adam 1e-5 with decay.
  static TrainConfig for_arch(const models::ModelConfig& model);

  void validate() const;  // ConfigError
  Json to_json() const;
  static TrainConfig from_json(const Json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over steps
  std::string optimizer;
  double learning_rate = 0.0;
  double valid_roc_auc = 0.0;
  double valid_pr_auc = 0.0;
  std::optional<double> train_roc_auc;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_roc_auc = 0.0;
  std::string stop_reason;  // max_epochs | patience | budget | train_target
  std::string checkpoint_id;

  Json to_json() const;
  static TrainReport from_json(const Json& j);
};

/// Recordings of one split with their features and target vectors.
struct LabeledSet {
  std::vector<const data::ManifestEntry*> entries;
  std::vector<dsp::MelSpectrogram> mels;
  std::vector<std::vector<float>> targets;

  std::size_t size() const noexcept { return entries.size(); }
};

/// DataError when the split is empty.
LabeledSet load_split(const data::DatasetManifest& m, const data::TagVocabulary& vocab, data::Split split,
                      const data::FeatureOptions& opt);

/// Called after each epoch; returning false stops training.
using EpochHook = std::function<bool(const EpochRecord&)>;

/// Trains `model` in place. Only tensors with requires_grad set are updated;
/// batch-norm statistics are frozen when `freeze_batch_norm` is set, and for
/// any single-example batch. On
/// return the model holds the parameters of the best validation epoch
/// (argmax valid ROC-AUC, earliest on ties).
TrainReport fit(models::Model<float>& model, const LabeledSet& train, const LabeledSet& valid,
                const data::TagVocabulary& vocab, const TrainConfig& cfg, bool freeze_batch_norm = false,
                const EpochHook& hook = {});

struct TrainResult {
  models::ModelCheckpoint checkpoint;
  TrainReport report;
};

/// Builds cfg.model (seeded from cfg.seed), fits it on the train split and
/// selects on the valid split.
TrainResult train(const data::DatasetManifest& m, const data::TagVocabulary& vocab, const TrainConfig& cfg,
                  const data::FeatureOptions& opt, const std::string& experiment_id = {});

/// Evaluates a checkpoint on the valid split.
eval::EvalReport validate(const models::ModelCheckpoint& ckpt, const data::DatasetManifest& m,
                          const data::TagVocabulary& vocab, const data::FeatureOptions& opt);

/// Seed used to initialize the model in train().
std::uint64_t init_seed(const TrainConfig& cfg);

}  // namespace ccml::train
