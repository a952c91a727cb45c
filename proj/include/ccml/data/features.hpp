#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccml/data/manifest.hpp"
#include "ccml/dsp/spectrogram.hpp"

namespace ccml::data {

struct FeatureOptions {
  dsp::DspConfig dsp;
  /// Mel cache directory; features are computed in memory when absent.
  std::optional<std::filesystem::path> cache_dir;
};

/// Log-mel of one entry, truncated to the entry's effective duration (the
/// head of the recording is kept).
dsp::MelSpectrogram load_features(const DatasetManifest& m, const ManifestEntry& e, const FeatureOptions& opt);

/// Features for a list of entries, in order.
std::vector<dsp::MelSpectrogram> load_features(const DatasetManifest& m, const std::vector<const ManifestEntry*>& entries,
                                               const FeatureOptions& opt);

struct PreprocessFailure {
  std::string recording_id;
  std::string path;
  std::string error;
};

struct PreprocessReport {
  std::size_t computed = 0;
  std::size_t cached = 0;
  std::vector<PreprocessFailure> failures;

  Json to_json() const;
};

/// Populates the mel cache for every entry; failures are collected, not thrown.
PreprocessReport preprocess(const DatasetManifest& m, const dsp::DspConfig& dsp, const std::filesystem::path& cache_dir);

}  // namespace ccml::data
