#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ccml/util/json_file.hpp"

namespace ccml::analysis {

/// One completed (model, source, target, policy) run. Scores are percentages,
/// the unit of the published tables; source == target marks a single-domain
/// run (policy "all").
struct RunRecord {
  std::string model;
  std::string source;
  std::string target;
  std::string policy;  // "output" | "all"
  std::uint64_t seed = 0;
  double roc_auc_pct = 0.0;
  double pr_auc_pct = 0.0;
  std::string experiment_id;
  std::string checkpoint_id;

  Json to_json() const;
  /// DataError naming the missing field.
  static RunRecord from_json(const Json& j);
};

/// Appends one JSON line.
void append_run_record(const std::filesystem::path& registry, const RunRecord& r);
/// Blank lines are skipped; DataError "path:line" on malformed records.
std::vector<RunRecord> load_registry(const std::filesystem::path& registry);
std::vector<RunRecord> parse_registry(const std::string& text, const std::string& origin = "registry");

}  // namespace ccml::analysis
