#include "ccml/transfer/transfer.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>

#include "ccml/error.hpp"

namespace ccml::transfer {

std::string_view policy_name(FreezePolicy p) noexcept { return p == FreezePolicy::OutputOnly ? "output" : "all"; }

FreezePolicy parse_freeze_policy(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "output" || s == "output_only" || s == "outputonly") return FreezePolicy::OutputOnly;
  if (s == "all") return FreezePolicy::All;
  throw ConfigError("unknown fine-tuning policy '" + std::string(name) + "' (expected output or all)");
}

Json TransferPlan::to_json() const {
  return {{"source_checkpoint", source_checkpoint.string()},
          {"target_manifest", target_manifest.string()},
          {"target_dataset_id", target_dataset_id},
          {"policy", policy_name(policy)},
          {"train", train.to_json()}};
}

TransferPlan TransferPlan::from_json(const Json& j) {
  TransferPlan p;
  try {
    p.source_checkpoint = j.at("source_checkpoint").get<std::string>();
    p.target_manifest = j.at("target_manifest").get<std::string>();
    p.target_dataset_id = j.at("target_dataset_id").get<std::string>();
    p.policy = parse_freeze_policy(j.at("policy").get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("transfer plan: ") + e.what());
  }
  p.train = train::TrainConfig::from_json(j.at("train"));
  return p;
}

std::unique_ptr<models::Model<float>> initialize_from_source(const models::ModelCheckpoint& source,
                                                             const models::ModelConfig& target, std::uint64_t seed) {
  const auto& sc = source.config;
  if (sc.arch != target.arch) {
    throw TransferError("architecture mismatch: source is " + std::string(models::arch_name(sc.arch)) + ", target is " +
                        std::string(models::arch_name(target.arch)));
  }
  if (sc.width_scale != target.width_scale) {
    throw TransferError("width_scale mismatch: source " + std::to_string(sc.width_scale) + ", target " +
                        std::to_string(target.width_scale));
  }
  auto model = models::build_model<float>(target, seed);
  for (auto& e : model->params().entries()) {
    if (models::is_output_layer(target.arch, e.spec.name)) continue;
    const auto it = std::find_if(source.tensors.begin(), source.tensors.end(),
                                 [&](const models::NamedTensor& t) { return t.name == e.spec.name; });
    if (it == source.tensors.end()) throw TransferError("layer '" + e.spec.name + "' is missing from the source");
    if (it->shape != e.spec.shape) {
      throw TransferError("layer '" + e.spec.name + "': source shape " + it->shape.str() + " vs target " +
                          e.spec.shape.str());
    }
    std::copy(it->data.begin(), it->data.end(), e.tensor.data().begin());
  }
  model->init_output_layer(seed);
  return model;
}

std::vector<std::string> changed_backbone_tensors(const models::Model<float>& model,
                                                  const models::ModelCheckpoint& source) {
  std::vector<std::string> out;
  for (const auto& e : model.params().entries()) {
    if (models::is_output_layer(model.config().arch, e.spec.name)) continue;
    const auto& src = source.tensor(e.spec.name);
    const auto v = e.tensor.values();
    if (src.data.size() != v.size() || std::memcmp(src.data.data(), v.data(), v.size() * sizeof(float)) != 0) {
      out.push_back(e.spec.name);
    }
  }
  return out;
}

train::TrainReport finetune(models::Model<float>& model, const models::ModelCheckpoint& source, FreezePolicy policy,
                            const train::LabeledSet& train_set, const train::LabeledSet& valid_set,
                            const data::TagVocabulary& vocab, const train::TrainConfig& cfg) {
  const auto arch = model.config().arch;
  auto& entries = model.params().entries();
  std::vector<bool> saved;
  for (auto& e : entries) {
    saved.push_back(e.tensor.requires_grad());
    if (e.spec.trainable) e.tensor.set_requires_grad(policy == FreezePolicy::All || models::is_output_layer(arch, e.spec.name));
  }
  train::TrainReport report;
  try {
    report = train::fit(model, train_set, valid_set, vocab, cfg, policy == FreezePolicy::OutputOnly);
  } catch (...) {
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].tensor.set_requires_grad(saved[i]);
    throw;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].tensor.set_requires_grad(saved[i]);
  if (policy == FreezePolicy::OutputOnly) {
    const auto changed = changed_backbone_tensors(model, source);
    if (!changed.empty()) throw TransferError("freeze invariant violated: layer '" + changed.front() + "' changed");
  }
  return report;
}

train::TrainResult run_transfer(const models::ModelCheckpoint& source, const data::DatasetManifest& target,
                                const data::TagVocabulary& vocab, FreezePolicy policy, const train::TrainConfig& cfg,
                                const data::FeatureOptions& opt, const std::string& experiment_id) {
  cfg.validate();
  if (cfg.model.n_tags != vocab.size()) {
    throw VocabError("target config has " + std::to_string(cfg.model.n_tags) + " tags, vocabulary has " +
                     std::to_string(vocab.size()));
  }
  auto model = initialize_from_source(source, cfg.model, train::init_seed(cfg));
  const auto tr = train::load_split(target, vocab, data::Split::Train, opt);
  const auto va = train::load_split(target, vocab, data::Split::Valid, opt);
  train::TrainResult out;
  out.report = finetune(*model, source, policy, tr, va, vocab, cfg);
  models::Provenance prov;
  prov.source_dataset_id = source.provenance.source_dataset_id;
  prov.epochs_trained = source.provenance.epochs_trained + out.report.epochs.size();
  prov.experiment_id = experiment_id;
  out.checkpoint = models::capture(*model, vocab.tags, prov);
  out.report.checkpoint_id = out.checkpoint.provenance.content_hash;
  return out;
}

analysis::RunRecord make_run_record(const models::ModelCheckpoint& source, const std::string& target_dataset_id,
                                    FreezePolicy policy, std::uint64_t seed, const eval::EvalReport& report,
                                    const std::string& experiment_id, const std::string& checkpoint_id) {
  analysis::RunRecord r;
  r.model = std::string(models::arch_name(source.config.arch));
  r.source = source.provenance.source_dataset_id;
  r.target = target_dataset_id;
  r.policy = std::string(policy_name(policy));
  r.seed = seed;
  r.roc_auc_pct = report.macro_roc_auc * 100.0;
  r.pr_auc_pct = report.macro_pr_auc * 100.0;
  r.experiment_id = experiment_id;
  r.checkpoint_id = checkpoint_id;
  return r;
}

}  // namespace ccml::transfer
