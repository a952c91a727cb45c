#include "ccml/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "ccml/error.hpp"
#include "ccml/nn/optim.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::train {

namespace {

constexpr std::uint64_t kShuffleKey = fnv1a64("shuffle");
constexpr std::uint64_t kChunkKey = fnv1a64("chunk");
constexpr std::uint64_t kDropoutKey = fnv1a64("dropout");
constexpr std::uint64_t kInitKey = fnv1a64("init");

template <typename V>
V field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("train config: missing field '") + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("train config: field '") + key + "' has the wrong type");
  }
}

std::unique_ptr<nn::Optimizer<float>> make_optimizer(const nn::ScheduleStep& s, std::vector<nn::Tensor<float>> params) {
  if (s.optimizer == nn::OptimizerKind::Adam) return std::make_unique<nn::Adam<float>>(std::move(params), s.learning_rate);
  return std::make_unique<nn::Sgd<float>>(std::move(params), s.learning_rate, s.momentum);
}

using Snapshot = std::vector<std::vector<float>>;

Snapshot snapshot(const models::Model<float>& model) {
  Snapshot s;
  for (const auto& e : model.params().entries()) s.emplace_back(e.tensor.values());
  return s;
}

void restore(models::Model<float>& model, const Snapshot& s) {
  auto& entries = model.params().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) std::copy(s[i].begin(), s[i].end(), entries[i].tensor.data().begin());
}

}  // namespace

TrainConfig TrainConfig::for_arch(const models::ModelConfig& model) {
  TrainConfig c;
  c.model = model;
  switch (model.arch) {
    case models::Arch::VggIsh:
      c.max_epochs = 200;
      break;
    case models::Arch::Musicnn:
      c.max_epochs = 50;
      break;
    case models::Arch::Ast:
      c.batch_size = 12;
      c.max_epochs = 30;
      c.policy = nn::SchedulePolicy::AstAdamDecay;
      c.learning_rate = 1e-5;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (wall_budget_sec < 0.0) throw ConfigError("wall_budget_sec must be >= 0");
  if (stop_at_train_roc_auc && !eval_train) throw ConfigError("stop_at_train_roc_auc requires eval_train");
}

Json TrainConfig::to_json() const {
  Json j{{"model", model.to_json()},
         {"batch_size", batch_size},
         {"max_epochs", max_epochs},
         {"policy", nn::policy_name(policy)},
         {"learning_rate", learning_rate},
         {"seed", seed},
         {"patience", patience},
         {"wall_budget_sec", wall_budget_sec},
         {"eval_train", eval_train}};
  j["stop_at_train_roc_auc"] = stop_at_train_roc_auc ? Json(*stop_at_train_roc_auc) : Json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const Json& j) {
  TrainConfig c;
  c.model = models::ModelConfig::from_json(field<Json>(j, "model"));
  c.batch_size = field<std::size_t>(j, "batch_size");
  c.max_epochs = field<std::size_t>(j, "max_epochs");
  c.policy = nn::parse_policy(field<std::string>(j, "policy"));
  c.learning_rate = field<double>(j, "learning_rate");
  c.seed = field<std::uint64_t>(j, "seed");
  c.patience = j.value("patience", std::size_t{0});
  c.wall_budget_sec = j.value("wall_budget_sec", 0.0);
  c.eval_train = j.value("eval_train", false);
  if (j.contains("stop_at_train_roc_auc") && !j["stop_at_train_roc_auc"].is_null()) {
    c.stop_at_train_roc_auc = j["stop_at_train_roc_auc"].get<double>();
  }
  c.validate();
  return c;
}

Json TrainReport::to_json() const {
  Json eps = Json::array();
  for (const auto& e : epochs) {
    Json r{{"epoch", e.epoch},
           {"loss", e.loss},
           {"optimizer", e.optimizer},
           {"learning_rate", e.learning_rate},
           {"valid_roc_auc", e.valid_roc_auc},
           {"valid_pr_auc", e.valid_pr_auc}};
    if (e.train_roc_auc) r["train_roc_auc"] = *e.train_roc_auc;
    eps.push_back(std::move(r));
  }
  return {{"epochs", eps},
          {"best_epoch", best_epoch},
          {"best_valid_roc_auc", best_valid_roc_auc},
          {"stop_reason", stop_reason},
          {"checkpoint_id", checkpoint_id}};
}

TrainReport TrainReport::from_json(const Json& j) {
  TrainReport r;
  for (const auto& e : j.at("epochs")) {
    EpochRecord rec;
    rec.epoch = e.at("epoch").get<std::size_t>();
    rec.loss = e.at("loss").get<double>();
    rec.optimizer = e.at("optimizer").get<std::string>();
    rec.learning_rate = e.at("learning_rate").get<double>();
    rec.valid_roc_auc = e.at("valid_roc_auc").get<double>();
    rec.valid_pr_auc = e.at("valid_pr_auc").get<double>();
    if (e.contains("train_roc_auc")) rec.train_roc_auc = e["train_roc_auc"].get<double>();
    r.epochs.push_back(rec);
  }
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.best_valid_roc_auc = j.at("best_valid_roc_auc").get<double>();
  r.stop_reason = j.at("stop_reason").get<std::string>();
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  return r;
}

LabeledSet load_split(const data::DatasetManifest& m, const data::TagVocabulary& vocab, data::Split split,
                      const data::FeatureOptions& opt) {
  LabeledSet s;
  s.entries = m.split(split);
  if (s.entries.empty()) {
    throw DataError(m.dataset_id + ": split '" + std::string(data::split_name(split)) + "' is empty");
  }
  s.mels = data::load_features(m, s.entries, opt);
  for (const auto* e : s.entries) s.targets.push_back(data::encode_targets(*e, vocab));
  return s;
}

TrainReport fit(models::Model<float>& model, const LabeledSet& train, const LabeledSet& valid,
                const data::TagVocabulary& vocab, const TrainConfig& cfg, bool freeze_batch_norm,
                const EpochHook& hook) {
  cfg.validate();
  if (train.size() == 0) throw DataError("train split is empty");
  if (valid.size() == 0) throw DataError("valid split is empty");
  const auto& mc = model.config();
  if (mc.n_tags != vocab.size()) {
    throw VocabError("model predicts " + std::to_string(mc.n_tags) + " tags, vocabulary has " +
                     std::to_string(vocab.size()));
  }
  const std::size_t F = mc.n_mels, Tn = mc.chunk.n_frames, K = mc.n_tags;
  const nn::LrSchedule schedule{cfg.policy, cfg.learning_rate, cfg.max_epochs};
  const auto params = model.params().trainable();
  if (params.empty()) throw ConfigError("nothing to train: every parameter is frozen");

  std::unique_ptr<nn::Optimizer<float>> opt;
  nn::OptimizerKind current{};
  TrainReport report;
  Snapshot best;
  double best_score = -1.0;
  std::size_t since_best = 0;
  const auto started = std::chrono::steady_clock::now();
  report.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto step_cfg = schedule.at(epoch);
    if (!opt || step_cfg.optimizer != current) {
      opt = make_optimizer(step_cfg, params);
      current = step_cfg.optimizer;
    }
    opt->set_learning_rate(step_cfg.learning_rate);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleKey, epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    // A trailing batch of one would leave batch norm without a variance.
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      batches.emplace_back(s, std::min(cfg.batch_size, order.size() - s));
    }
    if (batches.size() > 1 && batches.back().second == 1) {
      batches.pop_back();
      batches.back().second += 1;
    }

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const auto [start, b] = batches[step];
      std::vector<float> x(b * F * Tn), y(b * K);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t r = order[start + i];
        const auto c = dsp::chunk(mc.chunk, train.mels[r], dsp::ChunkMode::TrainRandom,
                                  derive_seed(cfg.seed, kChunkKey, epoch, r));
        std::copy(c[0].data.begin(), c[0].data.end(), x.begin() + static_cast<long>(i * F * Tn));
        std::copy(train.targets[r].begin(), train.targets[r].end(), y.begin() + static_cast<long>(i * K));
      }
      const std::string where = "epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1);
      double loss_value = 0.0;
      try {
        models::ForwardOptions fo;
        fo.training = true;
        // Batch statistics of a single example have zero variance.
        fo.freeze_batch_norm = freeze_batch_norm || b == 1;
        fo.dropout_seed = derive_seed(cfg.seed, kDropoutKey, epoch, step);
        const auto logits = model.forward(nn::Tensor<float>::from_data({b, 1, F, Tn}, std::move(x)), fo);
        const auto loss = nn::bce_with_logits(logits, nn::Tensor<float>::from_data({b, K}, std::move(y)));
        loss_value = static_cast<double>(loss.item());
        if (!std::isfinite(loss_value)) throw TrainingFault("non-finite loss at " + where);
        opt->zero_grad();
        loss.backward();
        opt->step();
      } catch (const NumericFault& e) {
        throw TrainingFault("numeric fault at " + where + ": " + e.what());
      }
      loss_sum += loss_value * static_cast<double>(b);
      seen += b;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(seen);
    rec.optimizer = step_cfg.optimizer == nn::OptimizerKind::Adam ? "adam" : "sgd";
    rec.learning_rate = step_cfg.learning_rate;
    const auto vr = eval::evaluate_features(model, valid.entries, valid.mels, vocab);
    rec.valid_roc_auc = vr.macro_roc_auc;
    rec.valid_pr_auc = vr.macro_pr_auc;
    if (cfg.eval_train) rec.train_roc_auc = eval::evaluate_features(model, train.entries, train.mels, vocab).macro_roc_auc;
    report.epochs.push_back(rec);

    if (rec.valid_roc_auc > best_score) {
      best_score = rec.valid_roc_auc;
      report.best_epoch = epoch;
      best = snapshot(model);
      since_best = 0;
    } else {
      ++since_best;
    }

    if (hook && !hook(rec)) {
      report.stop_reason = "hook";
      break;
    }
    if (cfg.stop_at_train_roc_auc && rec.train_roc_auc && *rec.train_roc_auc >= *cfg.stop_at_train_roc_auc) {
      report.stop_reason = "train_target";
      break;
    }
    if (cfg.patience > 0 && since_best >= cfg.patience) {
      report.stop_reason = "patience";
      break;
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    if (cfg.wall_budget_sec > 0.0 && elapsed.count() >= cfg.wall_budget_sec && epoch < cfg.max_epochs) {
      report.stop_reason = "budget";
      break;
    }
  }
  report.best_valid_roc_auc = best_score;
  restore(model, best);
  return report;
}

std::uint64_t init_seed(const TrainConfig& cfg) { return derive_seed(cfg.seed, kInitKey); }

TrainResult train(const data::DatasetManifest& m, const data::TagVocabulary& vocab, const TrainConfig& cfg,
                  const data::FeatureOptions& opt, const std::string& experiment_id) {
  cfg.validate();
  if (cfg.model.n_tags != vocab.size()) {
    throw VocabError("model config has " + std::to_string(cfg.model.n_tags) + " tags, vocabulary has " +
                     std::to_string(vocab.size()));
  }
  const auto tr = load_split(m, vocab, data::Split::Train, opt);
  const auto va = load_split(m, vocab, data::Split::Valid, opt);
  auto model = models::build_model<float>(cfg.model, init_seed(cfg));
  TrainResult out;
  out.report = fit(*model, tr, va, vocab, cfg);
  models::Provenance prov;
  prov.source_dataset_id = m.dataset_id;
  prov.epochs_trained = out.report.epochs.size();
  prov.experiment_id = experiment_id;
  out.checkpoint = models::capture(*model, vocab.tags, prov);
  out.report.checkpoint_id = out.checkpoint.provenance.content_hash;
  return out;
}

eval::EvalReport validate(const models::ModelCheckpoint& ckpt, const data::DatasetManifest& m,
                          const data::TagVocabulary& vocab, const data::FeatureOptions& opt) {
  return eval::evaluate(ckpt, m, vocab, data::Split::Valid, opt);
}

}  // namespace ccml::train
