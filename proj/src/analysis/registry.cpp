#include "ccml/analysis/registry.hpp"

#include <sstream>

#include "ccml/error.hpp"

namespace ccml::analysis {

Json RunRecord::to_json() const {
  return {{"model", model},   {"source", source},         {"target", target},
          {"policy", policy}, {"seed", seed},             {"roc_auc_pct", roc_auc_pct},
          {"pr_auc_pct", pr_auc_pct}, {"experiment_id", experiment_id}, {"checkpoint_id", checkpoint_id}};
}

RunRecord RunRecord::from_json(const Json& j) {
  auto need = [&](const char* key) -> const Json& {
    if (!j.is_object() || !j.contains(key)) throw DataError(std::string("run record: missing field '") + key + "'");
    return j.at(key);
  };
  RunRecord r;
  try {
    r.model = need("model").get<std::string>();
    r.source = need("source").get<std::string>();
    r.target = need("target").get<std::string>();
    r.policy = need("policy").get<std::string>();
    r.seed = need("seed").get<std::uint64_t>();
    r.roc_auc_pct = need("roc_auc_pct").get<double>();
    r.pr_auc_pct = need("pr_auc_pct").get<double>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("run record: ") + e.what());
  }
  r.experiment_id = j.value("experiment_id", "");
  r.checkpoint_id = j.value("checkpoint_id", "");
  if (r.policy != "output" && r.policy != "all") throw DataError("run record: policy must be 'output' or 'all'");
  return r;
}

void append_run_record(const std::filesystem::path& registry, const RunRecord& r) {
  append_json_line(registry, r.to_json());
}

std::vector<RunRecord> parse_registry(const std::string& text, const std::string& origin) {
  std::vector<RunRecord> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(RunRecord::from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError(origin + ":" + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RunRecord> load_registry(const std::filesystem::path& registry) {
  std::string text;
  try {
    text = read_text_file(registry);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  return parse_registry(text, registry.string());
}

}  // namespace ccml::analysis
