#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccml/util/json_file.hpp"

namespace ccml::data {

enum class Split { Train, Valid, Test };

std::string_view split_name(Split s) noexcept;
/// "train", "valid" (or "validation"), "test". ConfigError otherwise.
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::string recording_id;
  std::filesystem::path audio_path;  // absolute, or relative to the manifest file
  std::vector<std::string> tags;
  std::optional<Split> split;
  double duration_sec = 0.0;
  /// Set by apply_duration_cap; audio beyond it is dropped at load time.
  std::optional<double> max_duration_sec;

  double effective_duration() const noexcept {
    return max_duration_sec && *max_duration_sec < duration_sec ? *max_duration_sec : duration_sec;
  }
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string dataset_id;
  std::vector<ManifestEntry> entries;
  /// Directory relative audio paths resolve against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const;
  /// Entries of one split, in manifest order.
  std::vector<const ManifestEntry*> split(Split s) const;
  const ManifestEntry* find(std::string_view recording_id) const;
  double total_effective_duration() const;
  /// ManifestError on duplicate ids, empty ids or negative durations.
  void validate() const;
};

// Manifest JSONL: an optional first line {"dataset_id": "..."} followed by one
// record per line:
//   {"recording_id": str, "audio_path": str, "tags": [str], "split": "train"|"valid"|"test" (optional),
//    "duration_sec": number}
// Schema violations raise ManifestError naming the line and record id.
DatasetManifest parse_manifest_jsonl(std::string_view text, const std::string& origin = "manifest");
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_jsonl(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// CSV with a header row naming recording_id, audio_path, tags, duration_sec
/// and optionally split; tags are separated by '|'. Fields may be quoted.
DatasetManifest load_manifest_csv(const std::filesystem::path& path, const std::string& dataset_id);

/// Every entry's effective duration becomes min(duration, cap). No cap: unchanged.
DatasetManifest apply_duration_cap(DatasetManifest m, std::optional<double> cap_sec);

struct SplitRatios {
  double train = 0.8, valid = 0.1, test = 0.1;
};

/// Entries without a split get one from a keyed hash of (seed, recording_id);
/// existing splits are kept. ConfigError unless the ratios are non-negative
/// and sum to 1.
DatasetManifest assign_splits(DatasetManifest m, const SplitRatios& ratios = {}, std::uint64_t seed = 0);

}  // namespace ccml::data
