#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccml/analysis/registry.hpp"

namespace ccml::analysis {

/// Dataset order fixes the row/column order; N = datasets, M = models,
/// F = policies.
struct AggregationConfig {
  std::vector<std::string> datasets;
  std::vector<std::string> models;
  std::vector<std::string> policies{"output", "all"};

  void validate() const;  // ConfigError unless N >= 2, M >= 1, F >= 1
};

/// Raw ROC-AUC percentages, rows = sources, columns = targets. The diagonal
/// holds the single-domain score and is absent for "output".
struct TransferMatrix {
  std::string model;
  std::string policy;
  std::vector<std::string> datasets;
  std::vector<std::optional<double>> cells;  // N x N row-major

  std::size_t size() const noexcept { return datasets.size(); }
  std::optional<double>& at(std::size_t source, std::size_t target) { return cells[source * size() + target]; }
  const std::optional<double>& at(std::size_t source, std::size_t target) const { return cells[source * size() + target]; }
  /// Index of `name`; ConfigError when absent.
  std::size_t index(const std::string& name) const;
  bool operator==(const TransferMatrix&) const = default;
};

/// Normalized, model- and policy-averaged transfer values in [0,1].
struct AggregateMatrix {
  std::vector<std::string> datasets;
  std::vector<std::optional<double>> cells;  // diagonal empty

  std::size_t size() const noexcept { return datasets.size(); }
  const std::optional<double>& at(std::size_t source, std::size_t target) const { return cells[source * size() + target]; }
  std::size_t index(const std::string& name) const;
  bool operator==(const AggregateMatrix&) const = default;
};

/// One matrix per (model, policy) in cfg order. RegistryConflict on two
/// records for one cell with different scores; MissingCell listing every
/// absent off-diagonal cell.
std::vector<TransferMatrix> collect_matrices(const std::vector<RunRecord>& records, const AggregationConfig& cfg);

/// (x - min) / (max - min); a constant column maps to 0.5 everywhere.
std::vector<double> minmax_normalize(const std::vector<double>& column);

/// Column-wise normalization of the off-diagonal cells (diagonal dropped).
/// MissingCell when an off-diagonal cell is absent.
AggregateMatrix normalize(const TransferMatrix& m);

/// Element-wise mean of the normalized matrices. ShapeError when dataset
/// lists differ.
AggregateMatrix aggregate(const std::vector<TransferMatrix>& matrices);

struct BarSummary {
  std::string policy;
  std::vector<std::string> datasets;
  /// Mean raw score over models, rows = sources, columns = targets; the
  /// diagonal carries the single-domain reference (mean of the "all"
  /// diagonals) when available.
  std::vector<std::optional<double>> cells;

  std::size_t size() const noexcept { return datasets.size(); }
  const std::optional<double>& at(std::size_t source, std::size_t target) const { return cells[source * size() + target]; }
};

BarSummary bar_summary(const std::vector<TransferMatrix>& matrices, const std::string& policy);

/// Every source attaining the column maximum, in dataset order.
std::vector<std::string> best_source(const AggregateMatrix& agg, const std::string& target);

/// Matrices with only the given model/policy.
std::vector<TransferMatrix> select(const std::vector<TransferMatrix>& matrices, const std::string& model,
                                   const std::string& policy);

}  // namespace ccml::analysis
