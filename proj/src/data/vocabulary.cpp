#include "ccml/data/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ccml/error.hpp"

namespace ccml::data {

long TagVocabulary::index_of(const std::string& tag) const {
  const auto it = std::find(tags.begin(), tags.end(), tag);
  return it == tags.end() ? -1 : static_cast<long>(it - tags.begin());
}

Json TagVocabulary::to_json() const { return {{"tags", tags}, {"relative_frequency", relative_frequency}}; }

TagVocabulary TagVocabulary::from_json(const Json& j) {
  TagVocabulary v;
  try {
    v.tags = j.at("tags").get<std::vector<std::string>>();
    v.relative_frequency = j.value("relative_frequency", std::vector<double>{});
  } catch (const Json::exception& e) {
    throw VocabularyError(std::string("malformed vocabulary: ") + e.what());
  }
  if (!v.relative_frequency.empty() && v.relative_frequency.size() != v.tags.size()) {
    throw VocabularyError("relative_frequency length differs from tags");
  }
  std::set<std::string> seen(v.tags.begin(), v.tags.end());
  if (seen.size() != v.tags.size()) throw VocabularyError("duplicate tag in vocabulary");
  return v;
}

std::vector<std::pair<std::string, std::size_t>> tag_counts(const DatasetManifest& m) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : m.entries) {
    // A tag listed twice on one recording still counts once.
    std::set<std::string> unique(e.tags.begin(), e.tags.end());
    for (const auto& t : unique) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

TagVocabulary build_vocabulary(const DatasetManifest& m, const DatasetConfig& cfg) {
  if (cfg.top_k_tags < 1) throw ConfigError("top_k_tags must be >= 1");
  const auto counts = tag_counts(m);
  if (counts.size() < cfg.top_k_tags) {
    throw VocabularyError(m.dataset_id + ": " + std::to_string(counts.size()) + " distinct tags, top_k is " +
                          std::to_string(cfg.top_k_tags));
  }
  TagVocabulary v;
  const double n = static_cast<double>(m.entries.size());
  for (std::size_t i = 0; i < cfg.top_k_tags; ++i) {
    v.tags.push_back(counts[i].first);
    v.relative_frequency.push_back(static_cast<double>(counts[i].second) / n);
  }
  return v;
}

std::vector<float> encode_targets(const ManifestEntry& e, const TagVocabulary& vocab) {
  std::vector<float> y(vocab.size(), 0.0f);
  for (const auto& t : e.tags) {
    const long i = vocab.index_of(t);
    if (i >= 0) y[static_cast<std::size_t>(i)] = 1.0f;
  }
  return y;
}

}  // namespace ccml::data
