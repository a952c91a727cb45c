#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccml/data/manifest.hpp"

namespace ccml::data {

struct DatasetConfig {
  std::size_t top_k_tags = 50;
  std::optional<double> max_duration_sec;
};

struct TagVocabulary {
  /// Descending frequency, ties in lexicographic order.
  std::vector<std::string> tags;
  /// Share of recordings carrying each tag, aligned with `tags`.
  std::vector<double> relative_frequency;

  std::size_t size() const noexcept { return tags.size(); }
  /// Position of `tag`, or -1.
  long index_of(const std::string& tag) const;

  Json to_json() const;
  static TagVocabulary from_json(const Json& j);
  bool operator==(const TagVocabulary&) const = default;
};

/// Top-k tags by the number of recordings carrying them. VocabularyError when
/// fewer than k distinct tags occur.
TagVocabulary build_vocabulary(const DatasetManifest& m, const DatasetConfig& cfg);

/// Tag counts over every distinct tag, most frequent first.
std::vector<std::pair<std::string, std::size_t>> tag_counts(const DatasetManifest& m);

/// 1 at position i iff vocab.tags[i] is among the entry's tags.
std::vector<float> encode_targets(const ManifestEntry& e, const TagVocabulary& vocab);

}  // namespace ccml::data
