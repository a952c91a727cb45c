#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ccml/analysis/matrix.hpp"

namespace ccml::analysis {

/// Wide score table: header "model,source,<target>:<policy>,...", one row per
/// (model, source), "-" for an absent cell. DataError "origin:line" on
/// malformed input.
std::vector<TransferMatrix> parse_score_table(const std::string& text, const std::string& origin = "table");
std::vector<TransferMatrix> load_score_table(const std::filesystem::path& path);
std::string score_table_csv(const std::vector<TransferMatrix>& matrices);

/// Registry records for every present cell.
std::vector<RunRecord> records_from_matrices(const std::vector<TransferMatrix>& matrices);
/// Datasets/models/policies in first-appearance order.
AggregationConfig config_from_matrices(const std::vector<TransferMatrix>& matrices);
AggregationConfig config_from_records(const std::vector<RunRecord>& records);

/// "source,<targets...>", blank diagonal.
std::string aggregate_csv(const AggregateMatrix& agg);
AggregateMatrix parse_aggregate_csv(const std::string& text, const std::string& origin = "aggregate");
/// "target,source,mean_roc_auc,single_domain", one row per present cell.
std::string bars_csv(const BarSummary& bars);

struct EmittedFiles {
  std::vector<std::filesystem::path> files;
};

/// Writes aggregate_matrix.csv, aggregate_matrix.json, bars_<policy>.csv and
/// best_sources.csv into `dir`.
EmittedFiles emit_analysis(const std::vector<TransferMatrix>& matrices, const std::filesystem::path& dir);

}  // namespace ccml::analysis
