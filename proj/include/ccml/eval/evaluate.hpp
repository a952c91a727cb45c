#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccml/data/features.hpp"
#include "ccml/data/vocabulary.hpp"
#include "ccml/models/checkpoint.hpp"

namespace ccml::eval {

struct TagMetrics {
  std::string tag;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  std::size_t positives = 0;
};

struct EvalReport {
  std::vector<TagMetrics> per_tag;  // evaluated tags, vocabulary order
  std::vector<std::string> skipped_tags;  // single-class in this split
  double macro_roc_auc = 0.0;
  double macro_pr_auc = 0.0;
  std::size_t n_songs = 0;

  Json to_json() const;
  static EvalReport from_json(const Json& j);
  /// Header plus one row per evaluated tag.
  std::string per_tag_csv() const;
};

/// Song-by-tag scores and 0/1 labels, row-major [n_songs x n_tags].
/// DataError when there are no songs. Macro averages are unweighted means
/// over evaluated tags (0 when every tag is skipped).
EvalReport compute_report(const std::vector<std::string>& tags, const std::vector<double>& scores,
                          const std::vector<std::uint8_t>& labels, std::size_t n_songs);

/// sigmoid per chunk, averaged over the sequential chunks of the recording.
template <typename T>
std::vector<double> song_scores(models::Model<T>& model, const dsp::MelSpectrogram& mel);

/// Scores songs with preloaded features (aligned with `entries`).
EvalReport evaluate_features(models::Model<float>& model, const std::vector<const data::ManifestEntry*>& entries,
                             const std::vector<dsp::MelSpectrogram>& mels, const data::TagVocabulary& vocab);

/// Loads features for `split` and evaluates. VocabError when the model's
/// vocabulary differs from `vocab`; DataError on an empty split.
EvalReport evaluate(const models::ModelCheckpoint& ckpt, const data::DatasetManifest& m, const data::TagVocabulary& vocab,
                    data::Split split, const data::FeatureOptions& opt);

/// Raises VocabError unless the tag lists are identical.
void require_same_vocabulary(const std::vector<std::string>& model_tags, const data::TagVocabulary& vocab);

}  // namespace ccml::eval
