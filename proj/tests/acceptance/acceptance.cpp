// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when any
// selected criterion fails. Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccml/analysis/matrix.hpp"
#include "ccml/analysis/table_io.hpp"
#include "ccml/data/synthetic.hpp"
#include "ccml/dsp/spectrogram.hpp"
#include "ccml/eval/metrics.hpp"
#include "ccml/models/model.hpp"
#include "ccml/transfer/transfer.hpp"
#include "ccml/util/json_file.hpp"
#include "cli.hpp"
#include "dsp_oracles.hpp"
#include "gradcheck_suite.hpp"
#include "metric_oracles.hpp"
#include "test_support.hpp"

using namespace ccml;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr double kMetricTol = 1e-12;
constexpr int kMetricInstances = 1000;
constexpr std::size_t kMetricMaxN = 500;
constexpr int kGradTrials = 20;
constexpr double kGradTol = 1e-4;
constexpr double kFilterbankRelTol = 1e-6;
constexpr double kOverfitTarget = 0.95;
constexpr std::size_t kOverfitEpochs = 100;
constexpr double kTransferMargin = 0.05;
constexpr int kTransferSeeds = 3;
constexpr int kTransferArchsNeeded = 2;
constexpr double kColumnTol = 1e-4;
constexpr double kAggregateTol = 1e-9;
constexpr double kBarTol = 1e-3;

// Wall-clock limits in seconds.
constexpr double kLimit[9] = {0, 30, 300, 60, 2700, 2700, 600, 1, 1800};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

const models::Arch kArchs[] = {models::Arch::VggIsh, models::Arch::Musicnn, models::Arch::Ast};

fs::path work_root() { return fs::temp_directory_path() / "ccml-acceptance"; }

data::FeatureOptions features() {
  data::FeatureOptions fo;
  fo.cache_dir = work_root() / "mel-cache";
  return fo;
}

dsp::ChunkSpec desk_chunk() { return dsp::ChunkSpec::for_duration(1.5, dsp::DspConfig{}); }

train::TrainConfig desk_train(models::Arch arch, std::size_t n_tags) {
  auto tc = train::TrainConfig::for_arch(models::ModelConfig::desk(arch, n_tags, desk_chunk()));
  tc.policy = nn::SchedulePolicy::AdamConstant;
  tc.learning_rate = 1e-3;
  return tc;
}

struct Corpus {
  data::DatasetManifest manifest;
  data::TagVocabulary vocab;
};

Corpus synth_corpus(const data::SyntheticSpec& spec) {
  const auto g = data::generate_synthetic(spec, work_root() / ("corpus-" + spec.dataset_id + "-" + std::to_string(spec.seed)));
  data::DatasetConfig dc;
  dc.top_k_tags = spec.n_tags;
  return {g.manifest, data::build_vocabulary(g.manifest, dc)};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1: metric oracles ---------------------------------------------------------

Outcome metric_oracles() {
  Rng rng(20240601);
  double worst = 0.0;
  int undefined_mismatch = 0;
  for (int i = 0; i < kMetricInstances; ++i) {
    const auto inst = testing::random_metric_instance(rng, kMetricMaxN);
    const auto roc = eval::roc_auc(inst.scores, inst.labels);
    const auto pr = eval::pr_auc(inst.scores, inst.labels);
    if (!roc || !pr) {
      ++undefined_mismatch;
      continue;
    }
    worst = std::max(worst, std::fabs(*roc - testing::roc_auc_pairs(inst.scores, inst.labels)));
    worst = std::max(worst, std::fabs(*pr - testing::pr_auc_sweep(inst.scores, inst.labels)));
  }
  return {worst <= kMetricTol && undefined_mismatch == 0,
          std::to_string(kMetricInstances) + " instances, worst |diff| " + fmt("%.3g", worst)};
}

// ---- 2: gradchecks ---------------------------------------------------------------

Outcome gradchecks() {
  auto results = testing::run_op_gradchecks(kGradTrials);
  const auto models = testing::run_model_gradchecks(kGradTrials);
  results.insert(results.end(), models.begin(), models.end());
  double worst = 0.0;
  std::string worst_name, failing;
  bool ok = true;
  for (const auto& r : results) {
    if (r.trials < kGradTrials || !(r.worst <= kGradTol)) {
      ok = false;
      failing += " " + r.name;
    }
    if (r.worst > worst || std::isnan(r.worst)) {
      worst = r.worst;
      worst_name = r.name;
    }
  }
  std::string d = std::to_string(results.size()) + " checks (" + std::to_string(models.size()) + " model), worst " +
                  fmt("%.3g", worst) + " (" + worst_name + ")";
  if (!ok) d += "; failing:" + failing;
  return {ok, d};
}

// ---- 3: DSP ------------------------------------------------------------------------

Outcome dsp_checks() {
  const dsp::DspConfig cfg;
  Rng rng(77);
  bool frames_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = cfg.fft_size + rng.below(40000);
    dsp::AudioClip c;
    c.sample_rate = cfg.target_sample_rate;
    c.samples = testing::random_floats(rng, n);
    const auto p = dsp::stft_power(c, cfg);
    const std::size_t expect = 1 + (n - cfg.fft_size) / cfg.hop_size;
    frames_ok = frames_ok && p.cols == expect && dsp::frame_count(n, cfg) == expect &&
                dsp::log_mel(c, cfg).n_frames() == expect;
  }
  frames_ok = frames_ok && dsp::frame_count(cfg.fft_size - 1, cfg) == 0;

  int peaks_ok = 0;
  const std::size_t bins[] = {2, 9, 23, 40, 64, 97, 128, 161, 199, 240};
  for (const auto bin : bins) {
    const double f = bin * double(cfg.target_sample_rate) / double(cfg.fft_size);
    const auto p = dsp::stft_power(testing::sine(f, cfg.target_sample_rate, 8192), cfg);
    bool ok = true;
    for (std::size_t t = 0; t < p.cols; ++t) ok = ok && testing::argmax_col(p, t) == bin;
    peaks_ok += ok;
  }

  const auto fb = dsp::mel_filterbank(cfg);
  const auto ref = testing::oracle_filterbank(cfg.target_sample_rate, static_cast<int>(cfg.fft_size),
                                              static_cast<int>(cfg.n_mels), cfg.f_min, cfg.f_max);
  double worst = 0.0;
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double peak = *std::max_element(ref[m].begin(), ref[m].end());
    for (std::size_t b = 0; b < fb.cols; ++b) worst = std::max(worst, std::fabs(fb(m, b) - ref[m][b]) / peak);
  }
  const bool ok = frames_ok && peaks_ok == 10 && worst <= kFilterbankRelTol && fb.rows == ref.size();
  return {ok, std::string("frame counts ") + (frames_ok ? "ok" : "WRONG") + ", sine peaks " + std::to_string(peaks_ok) +
                  "/10, filterbank worst rel " + fmt("%.3g", worst)};
}

// ---- 4: overfit ---------------------------------------------------------------------

Outcome overfit() {
  const auto c = synth_corpus(data::SyntheticSpec{});
  const auto fo = features();
  bool ok = true;
  std::string d;
  for (const auto arch : kArchs) {
    const auto t0 = Clock::now();
    auto tc = desk_train(arch, c.vocab.size());
    tc.max_epochs = kOverfitEpochs;
    tc.eval_train = true;
    tc.stop_at_train_roc_auc = kOverfitTarget;
    tc.seed = 1;
    const auto res = train::train(c.manifest, c.vocab, tc, fo);
    double best = 0.0;
    std::size_t at = 0;
    for (const auto& e : res.report.epochs) {
      if (e.train_roc_auc && *e.train_roc_auc > best) {
        best = *e.train_roc_auc;
        at = e.epoch;
      }
    }
    const double secs = seconds_since(t0);
    const bool arch_ok = best >= kOverfitTarget && secs <= kLimit[4];
    ok = ok && arch_ok;
    d += std::string(d.empty() ? "" : "; ") + std::string(models::arch_name(arch)) + " " + fmt("%.4f", best) + " @" +
         std::to_string(at) + " (" + fmt("%.0fs", secs) + ")";
  }
  return {ok, d};
}

// ---- 5: transfer benefit ---------------------------------------------------------------

std::size_t source_epochs(models::Arch arch) { return arch == models::Arch::Ast ? 10 : 25; }

Outcome transfer_benefit() {
  const auto fo = features();
  int archs_ok = 0;
  std::string d;
  for (const auto arch : kArchs) {
    std::vector<double> diffs;
    for (int s = 0; s < kTransferSeeds; ++s) {
      data::SyntheticSpec src_spec, tgt_spec;
      src_spec.dataset_id = "src";
      src_spec.seed = 100 + s;
      tgt_spec.dataset_id = "tgt";
      tgt_spec.seed = 200 + s;
      tgt_spec.signature_offset = 4;
      const auto src = synth_corpus(src_spec);
      const auto tgt = synth_corpus(tgt_spec);

      auto tc = desk_train(arch, src.vocab.size());
      tc.max_epochs = source_epochs(arch);
      tc.seed = s;
      const auto trained = train::train(src.manifest, src.vocab, tc, fo);

      auto tt = tc;
      tt.max_epochs = 10;
      tt.learning_rate = 1e-2;
      tt.seed = 50 + s;
      const auto with_source =
          transfer::run_transfer(trained.checkpoint, tgt.manifest, tgt.vocab, transfer::FreezePolicy::OutputOnly, tt, fo);
      const auto random = models::build_model<float>(tc.model, 999 + s);
      const auto random_ckpt = models::capture(*random, src.vocab.tags, {"random", 0, "", ""});
      const auto baseline =
          transfer::run_transfer(random_ckpt, tgt.manifest, tgt.vocab, transfer::FreezePolicy::OutputOnly, tt, fo);
      diffs.push_back(with_source.report.best_valid_roc_auc - baseline.report.best_valid_roc_auc);
    }
    auto sorted = diffs;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    archs_ok += median >= kTransferMargin;
    d += std::string(d.empty() ? "" : "; ") + std::string(models::arch_name(arch)) + " median " + fmt("%+.4f", median) + " [";
    for (std::size_t i = 0; i < diffs.size(); ++i) d += (i ? " " : "") + fmt("%+.3f", diffs[i]);
    d += "]";
  }
  return {archs_ok >= kTransferArchsNeeded, std::to_string(archs_ok) + "/3 archs: " + d};
}

// ---- 6: freeze invariant -----------------------------------------------------------------

Outcome freeze_invariant() {
  data::SyntheticSpec spec;
  spec.dataset_id = "freeze";
  spec.n_clips = 60;
  const auto c = synth_corpus(spec);
  const auto fo = features();
  bool ok = true;
  std::string d;
  for (const auto arch : kArchs) {
    auto tc = desk_train(arch, c.vocab.size());
    tc.max_epochs = 2;
    tc.seed = 3;
    // A source whose running statistics and weights are not at their init values.
    const auto source = train::train(c.manifest, c.vocab, tc, fo).checkpoint;
    auto tt = tc;
    tt.learning_rate = 1e-2;
    tt.seed = 4;
    const auto tuned =
        transfer::run_transfer(source, c.manifest, c.vocab, transfer::FreezePolicy::OutputOnly, tt, fo).checkpoint;
    std::size_t backbone = 0, changed = 0, head_changed = 0;
    for (const auto& t : tuned.tensors) {
      const auto& s = source.tensor(t.name);
      const bool same = s.data.size() == t.data.size() &&
                        std::memcmp(s.data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0;
      if (models::is_output_layer(arch, t.name)) {
        head_changed += !same;
      } else {
        ++backbone;
        changed += !same;
      }
    }
    const bool arch_ok = changed == 0 && head_changed > 0 && tuned.tensors.size() == source.tensors.size();
    ok = ok && arch_ok;
    d += std::string(d.empty() ? "" : "; ") + std::string(models::arch_name(arch)) + " " + std::to_string(changed) + "/" +
         std::to_string(backbone) + " backbone tensors changed";
  }
  return {ok, d};
}

// ---- 7: published-table analysis ----------------------------------------------------------

Outcome table_analysis() {
  const auto ms = analysis::load_score_table(fs::path(CCML_FIXTURE_DIR) / "published_scores.csv");
  const auto col = analysis::normalize(analysis::select(ms, "VGG-ish", "output").at(0));
  const double expect[] = {1.0, 0.09756, 0.61585, 0.03659, 0.0};
  const auto mtt = col.index("MagnaTagATune");
  double col_err = 0.0;
  for (std::size_t s = 1; s < 6; ++s) col_err = std::max(col_err, std::fabs(col.at(s, mtt).value_or(-1) - expect[s - 1]));
  const bool a = col_err <= kColumnTol;

  const auto agg = analysis::aggregate(ms);
  const double cell = agg.at(agg.index("FMA-medium"), agg.index("MagnaTagATune")).value_or(-1);
  const bool b = std::fabs(cell - 1.0) <= kAggregateTol;

  const auto best = analysis::best_source(analysis::aggregate(analysis::select(ms, "Musicnn", "all")), "Carnatic");
  const bool c = best == std::vector<std::string>{"Hindustani"};

  const auto bars = analysis::bar_summary(ms, "output");
  const auto pos = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(bars.datasets.begin(), bars.datasets.end(), name) - bars.datasets.begin());
  };
  const double bar = bars.at(pos("FMA-medium"), pos("MagnaTagATune")).value_or(-1);
  const bool d = std::fabs(bar - 86.6566) <= kBarTol;

  return {a && b && c && d, "(a) column err " + fmt("%.2g", col_err) + ", (b) cell " + fmt("%.12g", cell) + ", (c) " +
                                (best.empty() ? std::string("none") : best[0]) + ", (d) bar " + fmt("%.4f", bar)};
}

// ---- 8: determinism --------------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), {"ccml", "--quiet"});
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

// synth -> preprocess -> grid (train, transfer both ways under both policies,
// evaluate, matrix) for every architecture, all under `dir`.
bool tiny_pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  const auto cache = (dir / "cache").string();
  std::vector<std::string> manifests;
  for (int k = 0; k < 2; ++k) {
    const std::string id = k == 0 ? "north" : "south";
    write_json_file(dir / (id + ".json"), {{"dataset_id", id},
                                           {"n_clips", 40},
                                           {"n_tags", 4},
                                           {"clip_seconds", 2.0},
                                           {"seed", 11 + k},
                                           {"signature_offset", 2 * k}});
    if (cli({"synth", "--spec", (dir / (id + ".json")).string(), "--out", (dir / id).string()}) != 0) return false;
    manifests.push_back((dir / id / "manifest.jsonl").string());
    if (cli({"preprocess", "--manifest", manifests.back(), "--cache", cache}) != 0) return false;
  }
  for (const auto arch : kArchs) {
    const std::string a(models::arch_name(arch));
    if (cli({"grid", "--manifest", manifests[0], "--manifest", manifests[1], "--arch", a, "--desk", "--epochs", "2",
             "--schedule", "adam_constant", "--lr", "1e-3", "--seed", "5", "--cache", cache, "--out", (dir / a).string()}) != 0) {
      return false;
    }
  }
  return true;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).string();
    std::string bytes = read_text_file(e.path());
    if (rel.ends_with(".run.json")) {
      auto j = Json::parse(bytes);
      j.erase("started_utc");
      j.erase("finished_utc");
      bytes = j.dump();
    }
    files[rel] = std::move(bytes);
  }
  return files;
}

Outcome determinism() {
  const auto dir = work_root() / "pipeline";
  const auto first = work_root() / "pipeline-first";
  fs::remove_all(dir);
  fs::remove_all(first);
  if (!tiny_pipeline(dir)) return {false, "first run failed"};
  fs::rename(dir, first);
  if (!tiny_pipeline(dir)) return {false, "second run failed"};
  const auto a = snapshot(first), b = snapshot(dir);
  std::size_t ckpts = 0, differing = 0;
  std::string first_diff;
  for (const auto& [name, bytes] : a) {
    ckpts += name.ends_with(".ckpt");
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      if (first_diff.empty()) first_diff = name;
      ++differing;
    }
  }
  const bool ok = differing == 0 && a.size() == b.size() && ckpts > 0;
  std::string d = std::to_string(a.size()) + " files (" + std::to_string(ckpts) + " checkpoints), " +
                  std::to_string(differing) + " differ";
  if (!first_diff.empty()) d += ", first: " + first_diff;
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracles", metric_oracles},   {"gradchecks", gradchecks},
      {"dsp", dsp_checks},                  {"overfit", overfit},
      {"transfer benefit", transfer_benefit}, {"freeze invariant", freeze_invariant},
      {"table analysis", table_analysis},   {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  fs::create_directories(work_root());

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs > kLimit[n]) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0fs", kLimit[n]) + " limit";
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
