#include "ccml/eval/evaluate.hpp"

#include <cmath>
#include <sstream>

#include "ccml/error.hpp"
#include "ccml/eval/metrics.hpp"

namespace ccml::eval {

Json EvalReport::to_json() const {
  Json tags = Json::array();
  for (const auto& t : per_tag) {
    tags.push_back({{"tag", t.tag}, {"roc_auc", t.roc_auc}, {"pr_auc", t.pr_auc}, {"positives", t.positives}});
  }
  return {{"macro_roc_auc", macro_roc_auc}, {"macro_pr_auc", macro_pr_auc}, {"n_songs", n_songs},
          {"per_tag", tags},                {"skipped_tags", skipped_tags}};
}

EvalReport EvalReport::from_json(const Json& j) {
  EvalReport r;
  r.macro_roc_auc = j.at("macro_roc_auc").get<double>();
  r.macro_pr_auc = j.at("macro_pr_auc").get<double>();
  r.n_songs = j.at("n_songs").get<std::size_t>();
  r.skipped_tags = j.at("skipped_tags").get<std::vector<std::string>>();
  for (const auto& t : j.at("per_tag")) {
    r.per_tag.push_back({t.at("tag").get<std::string>(), t.at("roc_auc").get<double>(), t.at("pr_auc").get<double>(),
                         t.at("positives").get<std::size_t>()});
  }
  return r;
}

std::string EvalReport::per_tag_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "tag,roc_auc,pr_auc,positives\n";
  for (const auto& t : per_tag) out << t.tag << ',' << t.roc_auc << ',' << t.pr_auc << ',' << t.positives << '\n';
  return out.str();
}

EvalReport compute_report(const std::vector<std::string>& tags, const std::vector<double>& scores,
                          const std::vector<std::uint8_t>& labels, std::size_t n_songs) {
  if (n_songs == 0) throw DataError("evaluation split has no songs");
  const std::size_t K = tags.size();
  if (scores.size() != n_songs * K || labels.size() != n_songs * K) {
    throw ShapeError("compute_report: score/label matrices do not match n_songs x n_tags");
  }
  EvalReport r;
  r.n_songs = n_songs;
  std::vector<double> s(n_songs);
  std::vector<std::uint8_t> y(n_songs);
  double roc_sum = 0, pr_sum = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_songs; ++i) {
      s[i] = scores[i * K + k];
      y[i] = labels[i * K + k];
      pos += y[i] != 0;
    }
    const auto roc = roc_auc(s, y);
    if (!roc) {
      r.skipped_tags.push_back(tags[k]);
      continue;
    }
    const double pr = *pr_auc(s, y);
    r.per_tag.push_back({tags[k], *roc, pr, pos});
    roc_sum += *roc;
    pr_sum += pr;
  }
  if (!r.per_tag.empty()) {
    r.macro_roc_auc = roc_sum / static_cast<double>(r.per_tag.size());
    r.macro_pr_auc = pr_sum / static_cast<double>(r.per_tag.size());
  }
  return r;
}

template <typename T>
std::vector<double> song_scores(models::Model<T>& model, const dsp::MelSpectrogram& mel) {
  const auto& cfg = model.config();
  const auto chunks = dsp::chunk(cfg.chunk, mel, dsp::ChunkMode::EvalSequential);
  const std::size_t F = cfg.n_mels, Tn = cfg.chunk.n_frames, K = cfg.n_tags;
  std::vector<double> acc(K, 0.0);
  nn::NoGradGuard guard;
  constexpr std::size_t kBatch = 16;
  for (std::size_t start = 0; start < chunks.size(); start += kBatch) {
    const std::size_t b = std::min(kBatch, chunks.size() - start);
    std::vector<T> x(b * F * Tn);
    for (std::size_t i = 0; i < b; ++i) {
      const auto& c = chunks[start + i].data;
      std::transform(c.begin(), c.end(), x.begin() + static_cast<long>(i * F * Tn), [](float v) { return static_cast<T>(v); });
    }
    const auto p = nn::sigmoid(model.forward(nn::Tensor<T>::from_data({b, 1, F, Tn}, std::move(x))));
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < K; ++k) acc[k] += static_cast<double>(p.values()[i * K + k]);
    }
  }
  for (auto& v : acc) v /= static_cast<double>(chunks.size());
  return acc;
}

template std::vector<double> song_scores(models::Model<float>&, const dsp::MelSpectrogram&);
template std::vector<double> song_scores(models::Model<double>&, const dsp::MelSpectrogram&);

EvalReport evaluate_features(models::Model<float>& model, const std::vector<const data::ManifestEntry*>& entries,
                             const std::vector<dsp::MelSpectrogram>& mels, const data::TagVocabulary& vocab) {
  if (entries.empty()) throw DataError("evaluation split has no songs");
  if (model.config().n_tags != vocab.size()) {
    throw VocabError("model predicts " + std::to_string(model.config().n_tags) + " tags, vocabulary has " +
                     std::to_string(vocab.size()));
  }
  const std::size_t K = vocab.size();
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  scores.reserve(entries.size() * K);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto s = song_scores(model, mels[i]);
    scores.insert(scores.end(), s.begin(), s.end());
    for (float v : data::encode_targets(*entries[i], vocab)) labels.push_back(v > 0.5f ? 1 : 0);
  }
  return compute_report(vocab.tags, scores, labels, entries.size());
}

void require_same_vocabulary(const std::vector<std::string>& model_tags, const data::TagVocabulary& vocab) {
  if (model_tags != vocab.tags) {
    throw VocabError("checkpoint vocabulary (" + std::to_string(model_tags.size()) +
                     " tags) differs from the dataset vocabulary (" + std::to_string(vocab.size()) + " tags)");
  }
}

EvalReport evaluate(const models::ModelCheckpoint& ckpt, const data::DatasetManifest& m, const data::TagVocabulary& vocab,
                    data::Split split, const data::FeatureOptions& opt) {
  require_same_vocabulary(ckpt.vocabulary, vocab);
  const auto entries = m.split(split);
  if (entries.empty()) throw DataError(m.dataset_id + ": split '" + std::string(data::split_name(split)) + "' is empty");
  auto model = models::instantiate<float>(ckpt);
  return evaluate_features(*model, entries, data::load_features(m, entries, opt), vocab);
}

}  // namespace ccml::eval
