#include "ccml/data/features.hpp"

#include <cmath>

#include "ccml/dsp/mel_cache.hpp"

namespace ccml::data {

namespace {

void apply_cap(dsp::MelSpectrogram& mel, const ManifestEntry& e, const dsp::DspConfig& cfg) {
  if (!e.max_duration_sec) return;
  const auto samples = static_cast<std::size_t>(std::llround(*e.max_duration_sec * cfg.target_sample_rate));
  mel.truncate_frames(dsp::frame_count(samples, cfg));
}

}  // namespace

dsp::MelSpectrogram load_features(const DatasetManifest& m, const ManifestEntry& e, const FeatureOptions& opt) {
  const auto path = m.resolve(e);
  dsp::MelSpectrogram mel;
  if (opt.cache_dir) {
    mel = dsp::MelCache(*opt.cache_dir, opt.dsp).get_or_compute(path).mel;
  } else {
    mel = dsp::log_mel(dsp::read_wav(path), opt.dsp);
  }
  apply_cap(mel, e, opt.dsp);
  return mel;
}

std::vector<dsp::MelSpectrogram> load_features(const DatasetManifest& m, const std::vector<const ManifestEntry*>& entries,
                                               const FeatureOptions& opt) {
  std::vector<dsp::MelSpectrogram> out;
  out.reserve(entries.size());
  for (const auto* e : entries) out.push_back(load_features(m, *e, opt));
  return out;
}

Json PreprocessReport::to_json() const {
  Json f = Json::array();
  for (const auto& x : failures) f.push_back({{"recording_id", x.recording_id}, {"path", x.path}, {"error", x.error}});
  return {{"computed", computed}, {"cached", cached}, {"failures", f}};
}

PreprocessReport preprocess(const DatasetManifest& m, const dsp::DspConfig& dsp, const std::filesystem::path& cache_dir) {
  const dsp::MelCache cache(cache_dir, dsp);
  PreprocessReport r;
  for (const auto& e : m.entries) {
    const auto path = m.resolve(e);
    try {
      const auto res = cache.get_or_compute(path);
      (res.computed ? r.computed : r.cached) += 1;
    } catch (const std::exception& ex) {
      r.failures.push_back({e.recording_id, path.string(), ex.what()});
    }
  }
  return r;
}

}  // namespace ccml::data
