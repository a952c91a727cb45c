#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccml/analysis/matrix.hpp"
#include "ccml/analysis/table_io.hpp"
#include "ccml/data/presets.hpp"
#include "ccml/data/synthetic.hpp"
#include "ccml/error.hpp"
#include "ccml/simd/kernels.hpp"
#include "ccml/transfer/transfer.hpp"
#include "ccml/util/hash.hpp"

namespace ccml::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCacheEnv = "CCML_CACHE_DIR";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- shared option blocks ---------------------------------------------------

struct FeatureArgs {
  std::string cache;
  std::string dsp;

  void add(CLI::App* app) {
    app->add_option("--cache", cache, std::string("Mel cache directory (default: $") + kCacheEnv + ", else none)");
    app->add_option("--dsp", dsp, "DSP config JSON (default: 16 kHz, 512/256 STFT, 128 Slaney mels)");
  }

  data::FeatureOptions resolve() const {
    data::FeatureOptions o;
    if (!dsp.empty()) o.dsp = dsp::DspConfig::from_json(read_json_file(dsp));
    if (!cache.empty()) {
      o.cache_dir = cache;
    } else if (const char* env = std::getenv(kCacheEnv); env && *env) {
      o.cache_dir = env;
    }
    return o;
  }
};

struct TrainArgs {
  std::string config;
  std::optional<std::size_t> epochs, batch, patience;
  std::optional<double> lr, budget;
  std::optional<std::string> policy;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--train-config", config, "TrainConfig JSON; the flags below override it");
    app->add_option("--epochs", epochs, "Maximum epochs (default: 200 VGG-ish, 50 Musicnn, 30 AST)");
    app->add_option("--batch", batch, "Batch size (default: 16, AST 12)");
    app->add_option("--lr", lr, "Base learning rate (default: 1e-4, AST 1e-5)");
    app->add_option("--schedule", policy, "Learning-rate schedule: adam_constant | mixed_adam_sgd | ast_adam_decay");
    app->add_option("--patience", patience, "Early-stop patience in epochs (default: off)");
    app->add_option("--budget-sec", budget, "Wall-clock budget in seconds (default: off)");
    app->add_option("--seed", seed, "Seed for initialization, shuffling, chunking and dropout")->capture_default_str();
  }

  void apply(train::TrainConfig& c) const {
    if (epochs) c.max_epochs = *epochs;
    if (batch) c.batch_size = *batch;
    if (lr) c.learning_rate = *lr;
    if (policy) c.policy = nn::parse_policy(*policy);
    if (patience) c.patience = *patience;
    if (budget) c.wall_budget_sec = *budget;
    c.seed = seed;
    c.validate();
  }
};

struct ModelArgs {
  std::string arch;
  bool desk = false;
  double chunk_sec = 1.5;

  void add(CLI::App* app, bool required) {
    auto* o = app->add_option("--arch", arch, "vggish | musicnn | ast");
    if (required) o->required();
    app->add_flag("--desk", desk, "Desk scale: widths / 16 and --chunk-sec chunks");
    app->add_option("--chunk-sec", chunk_sec, "Chunk length at desk scale in seconds")->capture_default_str();
  }

  models::ModelConfig build(std::size_t n_tags, const dsp::DspConfig& dsp) const {
    const auto a = models::parse_arch(arch);
    auto cfg = desk ? models::ModelConfig::desk(a, n_tags, dsp::ChunkSpec::for_duration(chunk_sec, dsp))
                    : models::ModelConfig::full(a, n_tags);
    cfg.n_mels = dsp.n_mels;
    cfg.validate();
    return cfg;
  }
};

struct DatasetArgs {
  std::string manifest;
  std::string preset;
  std::size_t top_k = 0;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "Dataset manifest (JSONL)")->required();
    app->add_option("--preset", preset, "Dataset preset: mtt | fma | lyra | makam | hindustani | carnatic");
    app->add_option("--top-k", top_k, "Vocabulary size (default: preset value, else every tag)");
  }

  struct Loaded {
    data::DatasetManifest manifest;
    data::TagVocabulary vocab;
  };

  Loaded load(std::optional<std::size_t> want_k = std::nullopt) const {
    if (!fs::exists(manifest)) throw UsageError("manifest '" + manifest + "' does not exist");
    Loaded l{data::load_manifest(manifest), {}};
    data::DatasetConfig dc;
    dc.top_k_tags = 0;
    if (!preset.empty()) dc = data::dataset_preset(preset).config;
    if (top_k > 0) dc.top_k_tags = top_k;
    if (want_k) dc.top_k_tags = *want_k;
    if (dc.top_k_tags == 0) dc.top_k_tags = data::tag_counts(l.manifest).size();
    l.manifest = data::apply_duration_cap(std::move(l.manifest), dc.max_duration_sec);
    l.vocab = data::build_vocabulary(l.manifest, dc);
    return l;
  }
};

// ---- run manifest -----------------------------------------------------------

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json environment() {
  return {{"compiler", __VERSION__},
          {"isa", std::string(simd::isa_name(simd::kernels().isa))},
          {"cxx_standard", static_cast<long>(__cplusplus)}};
}

/// Deterministic id: hash of the command and its configuration snapshot.
std::string experiment_id(const std::string& command, const Json& snapshot) {
  const std::string text = command + "\n" + snapshot.dump();
  return command + "-" + sha1_hex(text).substr(0, 12);
}

void write_run_manifest(const fs::path& path, const std::string& id, const std::string& command, const Json& snapshot,
                        const std::string& started) {
  write_json_file(path, {{"experiment_id", id},
                         {"command", command},
                         {"config", snapshot},
                         {"environment", environment()},
                         {"started_utc", started},
                         {"finished_utc", utc_now()}});
}

std::string sibling(const fs::path& p, const std::string& suffix) { return p.string() + suffix; }

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

// ---- commands ----------------------------------------------------------------

int cmd_synth(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
  data::SyntheticSpec spec;
  if (!spec_path.empty()) spec = data::SyntheticSpec::from_json(read_json_file(spec_path));
  if (seed) spec.seed = *seed;
  const auto corpus = data::generate_synthetic(spec, out);
  log("synth: wrote " + std::to_string(corpus.manifest.entries.size()) + " clips to " + corpus.manifest_path.string());
  return kOk;
}

int cmd_preprocess(const DatasetArgs& ds, const FeatureArgs& fa, const std::string& report_path) {
  const auto opt = fa.resolve();
  if (!opt.cache_dir) throw UsageError(std::string("preprocess needs --cache or $") + kCacheEnv);
  if (!fs::exists(ds.manifest)) throw UsageError("manifest '" + ds.manifest + "' does not exist");
  const auto m = data::load_manifest(ds.manifest);
  const auto rep = data::preprocess(m, opt.dsp, *opt.cache_dir);
  if (!report_path.empty()) write_json_file(report_path, rep.to_json());
  log("preprocess: " + std::to_string(rep.computed) + " computed, " + std::to_string(rep.cached) + " cached, " +
      std::to_string(rep.failures.size()) + " failed");
  for (const auto& f : rep.failures) log("  " + f.recording_id + " (" + f.path + "): " + f.error);
  return rep.failures.empty() ? kOk : kDataError;
}

train::TrainConfig make_train_config(const TrainArgs& ta, const ModelArgs& ma, std::size_t n_tags,
                                     const dsp::DspConfig& dsp) {
  train::TrainConfig c;
  if (!ta.config.empty()) {
    c = train::TrainConfig::from_json(read_json_file(ta.config));
    if (c.model.n_tags != n_tags) throw ConfigError("train config n_tags differs from the vocabulary size");
  } else {
    c = train::TrainConfig::for_arch(ma.build(n_tags, dsp));
  }
  ta.apply(c);
  return c;
}

int cmd_train(const DatasetArgs& ds, const ModelArgs& ma, const TrainArgs& ta, const FeatureArgs& fa,
              const std::string& out, std::string report_path) {
  const auto started = utc_now();
  const auto opt = fa.resolve();
  const auto d = ds.load();
  const auto cfg = make_train_config(ta, ma, d.vocab.size(), opt.dsp);
  const Json snapshot{{"train", cfg.to_json()},
                      {"dsp", opt.dsp.to_json()},
                      {"dataset_id", d.manifest.dataset_id},
                      {"vocabulary", d.vocab.tags}};
  const auto id = experiment_id("train", snapshot);
  log("train: " + std::string(models::arch_name(cfg.model.arch)) + " on " + d.manifest.dataset_id + " (" +
      std::to_string(d.vocab.size()) + " tags, batch " + std::to_string(cfg.batch_size) + ", " +
      std::to_string(cfg.max_epochs) + " epochs, " + std::string(nn::policy_name(cfg.policy)) + " lr " +
      std::to_string(cfg.learning_rate) + ")");
  const auto res = train::train(d.manifest, d.vocab, cfg, opt, id);
  models::save_checkpoint(res.checkpoint, out);
  if (report_path.empty()) report_path = sibling(out, ".report.json");
  Json rep = res.report.to_json();
  rep["experiment_id"] = id;
  write_json_file(report_path, rep);
  write_run_manifest(sibling(out, ".run.json"), id, "train", snapshot, started);
  log("train: best epoch " + std::to_string(res.report.best_epoch) + ", valid ROC-AUC " +
      std::to_string(res.report.best_valid_roc_auc) + " -> " + out);
  return kOk;
}

data::Split eval_split_or_valid(const data::DatasetManifest& m, data::Split want) {
  return m.split(want).empty() ? data::Split::Valid : want;
}

int cmd_transfer(const std::string& source_path, const DatasetArgs& ds, const std::string& policy_name,
                 const std::string& arch, const TrainArgs& ta, const FeatureArgs& fa, const std::string& out,
                 const std::string& registry, const std::string& eval_split, const std::string& plan_path) {
  const auto started = utc_now();
  const auto opt = fa.resolve();
  transfer::TransferPlan plan;
  models::ModelCheckpoint source;
  DatasetArgs target_args = ds;
  if (!plan_path.empty()) {
    plan = transfer::TransferPlan::from_json(read_json_file(plan_path));
    target_args.manifest = plan.target_manifest.string();
    source = models::load_checkpoint(plan.source_checkpoint);
  } else {
    if (source_path.empty()) throw UsageError("transfer needs --source (or --plan)");
    source = models::load_checkpoint(source_path);
    plan.source_checkpoint = source_path;
    plan.target_manifest = ds.manifest;
    plan.policy = transfer::parse_freeze_policy(policy_name);
  }
  const auto d = target_args.load();
  plan.target_dataset_id = d.manifest.dataset_id;
  if (!arch.empty() && models::parse_arch(arch) != source.config.arch) {
    throw TransferError("architecture mismatch: source checkpoint is " + std::string(models::arch_name(source.config.arch)) +
                        ", --arch asks for " + arch);
  }
  if (plan_path.empty()) {
    auto target_cfg = source.config;
    target_cfg.n_tags = d.vocab.size();
    plan.train = train::TrainConfig::for_arch(target_cfg);
    if (!ta.config.empty()) plan.train = train::TrainConfig::from_json(read_json_file(ta.config));
    ta.apply(plan.train);
  }
  if (plan.train.model.n_tags != d.vocab.size()) {
    throw ConfigError("plan model has " + std::to_string(plan.train.model.n_tags) + " tags, target vocabulary has " +
                      std::to_string(d.vocab.size()));
  }
  const Json snapshot{{"plan", plan.to_json()},
                      {"source_checkpoint_id", source.provenance.content_hash},
                      {"dsp", opt.dsp.to_json()},
                      {"vocabulary", d.vocab.tags}};
  const auto id = experiment_id("transfer", snapshot);
  log("transfer: " + source.provenance.source_dataset_id + " -> " + d.manifest.dataset_id + " (" +
      std::string(transfer::policy_name(plan.policy)) + ", " + std::string(models::arch_name(source.config.arch)) + ")");
  const auto res = transfer::run_transfer(source, d.manifest, d.vocab, plan.policy, plan.train, opt, id);
  models::save_checkpoint(res.checkpoint, out);
  Json rep = res.report.to_json();
  rep["experiment_id"] = id;
  write_json_file(sibling(out, ".report.json"), rep);
  write_json_file(sibling(out, ".plan.json"), plan.to_json());

  const auto split = eval_split_or_valid(d.manifest, data::parse_split(eval_split));
  const auto ev = eval::evaluate(res.checkpoint, d.manifest, d.vocab, split, opt);
  write_json_file(sibling(out, ".eval.json"), ev.to_json());
  if (!registry.empty()) {
    analysis::append_run_record(registry, transfer::make_run_record(source, d.manifest.dataset_id, plan.policy,
                                                                    plan.train.seed, ev, id,
                                                                    res.checkpoint.provenance.content_hash));
  }
  write_run_manifest(sibling(out, ".run.json"), id, "transfer", snapshot, started);
  log("transfer: " + std::string(data::split_name(split)) + " ROC-AUC " + std::to_string(ev.macro_roc_auc) + " -> " + out);
  return kOk;
}

int cmd_evaluate(const std::string& ckpt_path, const DatasetArgs& ds, const FeatureArgs& fa, const std::string& split,
                 const std::string& out, const std::string& csv) {
  const auto ckpt = models::load_checkpoint(ckpt_path);
  const auto d = ds.load(ds.top_k > 0 || !ds.preset.empty() ? std::nullopt : std::optional(ckpt.vocabulary.size()));
  const auto rep = eval::evaluate(ckpt, d.manifest, d.vocab, data::parse_split(split), fa.resolve());
  Json j = rep.to_json();
  j["checkpoint_id"] = ckpt.provenance.content_hash;
  j["split"] = split;
  if (!out.empty()) write_json_file(out, j);
  if (!csv.empty()) write_file_atomic(csv, rep.per_tag_csv());
  log("evaluate: " + split + " macro ROC-AUC " + std::to_string(rep.macro_roc_auc) + ", PR-AUC " +
      std::to_string(rep.macro_pr_auc) + " over " + std::to_string(rep.n_songs) + " songs");
  return kOk;
}

int cmd_matrix(const std::string& registry, const std::string& table, const std::string& emit,
               const std::vector<std::string>& datasets, const std::vector<std::string>& policies) {
  if (registry.empty() == table.empty()) throw UsageError("matrix needs exactly one of --registry and --from-table");
  std::vector<analysis::TransferMatrix> ms;
  if (!table.empty()) {
    ms = analysis::load_score_table(table);
  } else {
    const auto records = analysis::load_registry(registry);
    auto cfg = analysis::config_from_records(records);
    if (!datasets.empty()) cfg.datasets = datasets;
    if (!policies.empty()) cfg.policies = policies;
    ms = analysis::collect_matrices(records, cfg);
  }
  const auto files = analysis::emit_analysis(ms, emit);
  log("matrix: " + std::to_string(ms.size()) + " matrices -> " + std::to_string(files.files.size()) + " files in " + emit);
  return kOk;
}

int cmd_grid(const std::vector<std::string>& manifests, const ModelArgs& ma, const TrainArgs& ta,
             std::optional<std::size_t> transfer_epochs, const FeatureArgs& fa, const std::string& out_dir,
             const std::string& eval_split, std::size_t top_k) {
  if (manifests.size() < 2) throw UsageError("grid needs at least two --manifest entries");
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const auto registry = dir / "registry.jsonl";
  fs::remove(registry);
  const auto opt = fa.resolve();
  struct Source {
    std::string manifest;
    std::string dataset_id;
    fs::path ckpt;
  };
  std::vector<Source> sources;
  for (const auto& m : manifests) {
    DatasetArgs ds;
    ds.manifest = m;
    ds.top_k = top_k;
    const auto d = ds.load();
    const auto ckpt = dir / (d.manifest.dataset_id + ".ckpt");
    cmd_train(ds, ma, ta, fa, ckpt.string(), {});
    const auto loaded = models::load_checkpoint(ckpt);
    const auto split = eval_split_or_valid(d.manifest, data::parse_split(eval_split));
    const auto ev = eval::evaluate(loaded, d.manifest, d.vocab, split, opt);
    analysis::append_run_record(registry, transfer::make_run_record(loaded, d.manifest.dataset_id,
                                                                    transfer::FreezePolicy::All, ta.seed, ev,
                                                                    loaded.provenance.experiment_id,
                                                                    loaded.provenance.content_hash));
    sources.push_back({m, d.manifest.dataset_id, ckpt});
  }
  TrainArgs tta = ta;
  if (transfer_epochs) tta.epochs = transfer_epochs;
  for (const auto& s : sources) {
    for (const auto& t : sources) {
      if (t.manifest == s.manifest) continue;
      DatasetArgs ds;
      ds.manifest = t.manifest;
      ds.top_k = top_k;
      for (auto p : {transfer::FreezePolicy::OutputOnly, transfer::FreezePolicy::All}) {
        const auto out = dir / (s.dataset_id + "__" + t.dataset_id + "__" + std::string(transfer::policy_name(p)) + ".ckpt");
        cmd_transfer(s.ckpt.string(), ds, std::string(transfer::policy_name(p)), {}, tta, fa, out.string(),
                     registry.string(), eval_split, {});
      }
    }
  }
  return cmd_matrix(registry.string(), {}, (dir / "matrix").string(), {}, {});
}

int exit_code_for(const Error& e) {
  const auto& c = e.code();
  if (c == "MissingCell") return kMissingCells;
  if (c == "TrainingFault" || c == "NumericFault" || c == "OptimizerError") return kNumericFault;
  if (c == "ConfigError") return kUsage;
  return kDataError;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Cross-cultural music auto-tagging: features, training, transfer, evaluation and analysis"};
  app.require_subcommand(1);
  std::string isa;
  g_quiet = false;
  app.add_flag("--quiet", g_quiet, "Only report errors");
  app.add_option("--isa", isa, "Force the kernel variant: scalar | avx2 | neon (default: best available)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic tagged corpus");
  std::string synth_spec, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", synth_spec, "SyntheticSpec JSON (default: 200 clips, 8 tags, seed 7)");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Override the spec seed");

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Fill the mel cache for a manifest");
  DatasetArgs pre_ds;
  FeatureArgs pre_fa;
  std::string pre_report;
  pre->add_option("--manifest", pre_ds.manifest, "Dataset manifest (JSONL)")->required();
  pre_fa.add(pre);
  pre->add_option("--report", pre_report, "Write the preprocessing report (JSON) here");

  // train
  auto* tr = app.add_subcommand("train", "Single-domain training");
  DatasetArgs tr_ds;
  ModelArgs tr_ma;
  TrainArgs tr_ta;
  FeatureArgs tr_fa;
  std::string tr_out, tr_report;
  tr_ds.add(tr);
  tr_ma.add(tr, true);
  tr_ta.add(tr);
  tr_fa.add(tr);
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--report", tr_report, "TrainReport path (default: <out>.report.json)");

  // transfer
  auto* tf = app.add_subcommand("transfer", "Fine-tune a source checkpoint on a target dataset");
  DatasetArgs tf_ds;
  TrainArgs tf_ta;
  FeatureArgs tf_fa;
  std::string tf_source, tf_policy = "output", tf_out, tf_registry, tf_arch, tf_split = "test", tf_plan;
  tf->add_option("--source", tf_source, "Source checkpoint");
  tf->add_option("--manifest", tf_ds.manifest, "Target dataset manifest (JSONL)");
  tf->add_option("--preset", tf_ds.preset, "Target dataset preset");
  tf->add_option("--top-k", tf_ds.top_k, "Target vocabulary size (default: preset value, else every tag)");
  tf->add_option("--policy", tf_policy, "output | all")->capture_default_str();
  tf->add_option("--arch", tf_arch, "Expected architecture; must match the source");
  tf->add_option("--plan", tf_plan, "TransferPlan JSON instead of --source/--manifest/--policy");
  tf->add_option("--out", tf_out, "Checkpoint path")->required();
  tf->add_option("--registry", tf_registry, "Run registry (JSONL) to append the result to");
  tf->add_option("--eval-split", tf_split, "Split scored for the registry (falls back to valid)")->capture_default_str();
  tf_ta.add(tf);
  tf_fa.add(tf);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  DatasetArgs ev_ds;
  FeatureArgs ev_fa;
  std::string ev_ckpt, ev_split = "test", ev_out, ev_csv;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev_ds.add(ev);
  ev->add_option("--split", ev_split, "train | valid | test")->capture_default_str();
  ev->add_option("--out", ev_out, "EvalReport JSON path");
  ev->add_option("--csv", ev_csv, "Per-tag CSV path");
  ev_fa.add(ev);

  // matrix
  auto* mx = app.add_subcommand("matrix", "Build transfer matrices, the aggregate and bar data");
  std::string mx_registry, mx_table, mx_emit;
  std::vector<std::string> mx_datasets, mx_policies;
  mx->add_option("--registry", mx_registry, "Run registry (JSONL)");
  mx->add_option("--from-table", mx_table, "Published score table (CSV)");
  mx->add_option("--emit", mx_emit, "Output directory")->required();
  mx->add_option("--datasets", mx_datasets, "Dataset order (default: first appearance)");
  mx->add_option("--policies", mx_policies, "Policies to require (default: those in the registry)");

  // grid
  auto* gr = app.add_subcommand("grid", "Train every dataset, transfer every pair under both policies, aggregate");
  std::vector<std::string> gr_manifests;
  ModelArgs gr_ma;
  TrainArgs gr_ta;
  FeatureArgs gr_fa;
  std::optional<std::size_t> gr_transfer_epochs;
  std::string gr_out, gr_split = "test";
  std::size_t gr_top_k = 0;
  gr->add_option("--manifest", gr_manifests, "Dataset manifests (repeat)")->required();
  gr_ma.add(gr, true);
  gr_ta.add(gr);
  gr_fa.add(gr);
  gr->add_option("--transfer-epochs", gr_transfer_epochs, "Epochs for the transfer runs (default: --epochs)");
  gr->add_option("--top-k", gr_top_k, "Vocabulary size per dataset (default: every tag)");
  gr->add_option("--out", gr_out, "Output directory")->required();
  gr->add_option("--eval-split", gr_split, "Split scored for the registry")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (!isa.empty()) {
      simd::Isa want = simd::Isa::Scalar;
      if (isa == "avx2") {
        want = simd::Isa::Avx2;
      } else if (isa == "neon") {
        want = simd::Isa::Neon;
      } else if (isa != "scalar") {
        throw UsageError("unknown --isa '" + isa + "'");
      }
      if (!simd::force_isa(want)) throw UsageError("kernel variant '" + isa + "' is not available on this machine");
    }
    if (*synth) return cmd_synth(synth_spec, synth_out, synth_seed);
    if (*pre) return cmd_preprocess(pre_ds, pre_fa, pre_report);
    if (*tr) return cmd_train(tr_ds, tr_ma, tr_ta, tr_fa, tr_out, tr_report);
    if (*tf) {
      if (tf_plan.empty() && tf_ds.manifest.empty()) throw UsageError("transfer needs --manifest (or --plan)");
      return cmd_transfer(tf_source, tf_ds, tf_policy, tf_arch, tf_ta, tf_fa, tf_out, tf_registry, tf_split, tf_plan);
    }
    if (*ev) return cmd_evaluate(ev_ckpt, ev_ds, ev_fa, ev_split, ev_out, ev_csv);
    if (*mx) return cmd_matrix(mx_registry, mx_table, mx_emit, mx_datasets, mx_policies);
    if (*gr) return cmd_grid(gr_manifests, gr_ma, gr_ta, gr_transfer_epochs, gr_fa, gr_out, gr_split, gr_top_k);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace ccml::cli
