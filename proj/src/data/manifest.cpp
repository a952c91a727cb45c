#include "ccml/data/manifest.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "ccml/error.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::data {

namespace fs = std::filesystem;

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "valid" || name == "validation" || name == "val") return Split::Valid;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

fs::path DatasetManifest::resolve(const ManifestEntry& e) const {
  return e.audio_path.is_absolute() || base_dir.empty() ? e.audio_path : base_dir / e.audio_path;
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

const ManifestEntry* DatasetManifest::find(std::string_view id) const {
  for (const auto& e : entries) {
    if (e.recording_id == id) return &e;
  }
  return nullptr;
}

double DatasetManifest::total_effective_duration() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.effective_duration();
  return s;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.recording_id.empty()) throw ManifestError(dataset_id + ": record " + std::to_string(i) + " has an empty recording_id");
    if (!ids.insert(e.recording_id).second) {
      throw ManifestError(dataset_id + ": duplicate recording_id '" + e.recording_id + "'");
    }
    if (!(e.duration_sec >= 0.0) || !std::isfinite(e.duration_sec)) {
      throw ManifestError(dataset_id + ": record '" + e.recording_id + "' has an invalid duration_sec");
    }
  }
}

namespace {

ManifestEntry parse_record(const Json& j, const std::string& where) {
  auto fail = [&](const std::string& msg) -> ManifestError { return ManifestError(where + ": " + msg); };
  if (!j.is_object()) throw fail("record is not a JSON object");
  ManifestEntry e;
  if (!j.contains("recording_id") || !j["recording_id"].is_string()) throw fail("missing string field 'recording_id'");
  e.recording_id = j["recording_id"].get<std::string>();
  const std::string rec = where + " (record '" + e.recording_id + "')";
  auto rfail = [&](const std::string& msg) { return ManifestError(rec + ": " + msg); };
  if (!j.contains("audio_path") || !j["audio_path"].is_string()) throw rfail("missing string field 'audio_path'");
  e.audio_path = j["audio_path"].get<std::string>();
  if (!j.contains("tags") || !j["tags"].is_array()) throw rfail("missing list field 'tags'");
  for (const auto& t : j["tags"]) {
    if (!t.is_string()) throw rfail("'tags' must contain strings");
    e.tags.push_back(t.get<std::string>());
  }
  if (j.contains("split") && !j["split"].is_null()) {
    if (!j["split"].is_string()) throw rfail("'split' must be a string");
    try {
      e.split = parse_split(j["split"].get<std::string>());
    } catch (const ConfigError& err) {
      throw rfail(err.what());
    }
  }
  if (!j.contains("duration_sec") || !j["duration_sec"].is_number()) throw rfail("missing numeric field 'duration_sec'");
  e.duration_sec = j["duration_sec"].get<double>();
  if (!(e.duration_sec >= 0.0)) throw rfail("'duration_sec' must be >= 0");
  if (j.contains("max_duration_sec") && j["max_duration_sec"].is_number()) {
    e.max_duration_sec = j["max_duration_sec"].get<double>();
  }
  return e;
}

}  // namespace

DatasetManifest parse_manifest_jsonl(std::string_view text, const std::string& origin) {
  DatasetManifest m;
  std::set<std::string> ids;
  std::size_t line_no = 0, pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ManifestError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (first && j.is_object() && j.contains("dataset_id") && !j.contains("recording_id")) {
      if (!j["dataset_id"].is_string()) throw ManifestError(where + ": 'dataset_id' must be a string");
      m.dataset_id = j["dataset_id"].get<std::string>();
      first = false;
      continue;
    }
    first = false;
    ManifestEntry e = parse_record(j, where);
    if (!ids.insert(e.recording_id).second) {
      throw ManifestError(where + ": duplicate recording_id '" + e.recording_id + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ManifestError(e.what());
  }
  DatasetManifest m = parse_manifest_jsonl(text, path.string());
  if (m.dataset_id.empty()) m.dataset_id = path.stem().string();
  m.base_dir = path.parent_path();
  return m;
}

std::string manifest_to_jsonl(const DatasetManifest& m) {
  std::ostringstream out;
  out << Json{{"dataset_id", m.dataset_id}}.dump() << '\n';
  for (const auto& e : m.entries) {
    Json j{{"recording_id", e.recording_id},
           {"audio_path", e.audio_path.generic_string()},
           {"tags", e.tags},
           {"duration_sec", e.duration_sec}};
    if (e.split) j["split"] = split_name(*e.split);
    if (e.max_duration_sec) j["max_duration_sec"] = *e.max_duration_sec;
    out << j.dump() << '\n';
  }
  return out.str();
}

void save_manifest(const DatasetManifest& m, const fs::path& path) { write_file_atomic(path, manifest_to_jsonl(m)); }

namespace {

std::vector<std::string> csv_fields(const std::string& line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ManifestError(where + ": unterminated quote");
  out.push_back(cur);
  return out;
}

}  // namespace

DatasetManifest load_manifest_csv(const fs::path& path, const std::string& dataset_id) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  DatasetManifest m;
  m.dataset_id = dataset_id;
  m.base_dir = path.parent_path();
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.empty() || line == "\r") continue;
    const auto f = csv_fields(line, where);
    if (col.empty()) {
      for (std::size_t i = 0; i < f.size(); ++i) col[f[i]] = i;
      for (const char* req : {"recording_id", "audio_path", "tags", "duration_sec"}) {
        if (!col.count(req)) throw ManifestError(where + ": header lacks column '" + req + "'");
      }
      continue;
    }
    auto get = [&](const std::string& name) -> std::string {
      const auto it = col.find(name);
      return it == col.end() || it->second >= f.size() ? std::string{} : f[it->second];
    };
    Json j{{"recording_id", get("recording_id")}, {"audio_path", get("audio_path")}, {"tags", Json::array()}};
    std::string tags = get("tags");
    std::size_t start = 0;
    while (start <= tags.size() && !tags.empty()) {
      const std::size_t bar = std::min(tags.find('|', start), tags.size());
      if (bar > start) j["tags"].push_back(tags.substr(start, bar - start));
      start = bar + 1;
    }
    try {
      j["duration_sec"] = std::stod(get("duration_sec"));
    } catch (const std::exception&) {
      throw ManifestError(where + " (record '" + get("recording_id") + "'): 'duration_sec' is not a number");
    }
    if (const auto s = get("split"); !s.empty()) j["split"] = s;
    ManifestEntry e = parse_record(j, where);
    if (!ids.insert(e.recording_id).second) throw ManifestError(where + ": duplicate recording_id '" + e.recording_id + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest apply_duration_cap(DatasetManifest m, std::optional<double> cap_sec) {
  if (!cap_sec) return m;
  if (!(*cap_sec > 0.0)) throw ConfigError("max_duration_sec must be > 0");
  for (auto& e : m.entries) e.max_duration_sec = cap_sec;
  return m;
}

DatasetManifest assign_splits(DatasetManifest m, const SplitRatios& r, std::uint64_t seed) {
  if (r.train < 0 || r.valid < 0 || r.test < 0 || std::fabs(r.train + r.valid + r.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  for (auto& e : m.entries) {
    if (e.split) continue;
    const double u = static_cast<double>(derive_seed(seed, fnv1a64(e.recording_id)) >> 11) * 0x1.0p-53;
    e.split = u < r.train ? Split::Train : u < r.train + r.valid ? Split::Valid : Split::Test;
  }
  return m;
}

}  // namespace ccml::data
