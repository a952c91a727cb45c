#include "ccml/analysis/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "ccml/error.hpp"

namespace ccml::analysis {

namespace {

std::size_t find_index(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown dataset '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

void AggregationConfig::validate() const {
  if (datasets.size() < 2) throw ConfigError("aggregation needs N >= 2 datasets");
  if (models.empty()) throw ConfigError("aggregation needs M >= 1 models");
  if (policies.empty()) throw ConfigError("aggregation needs F >= 1 fine-tuning policies");
}

std::size_t TransferMatrix::index(const std::string& name) const { return find_index(datasets, name); }
std::size_t AggregateMatrix::index(const std::string& name) const { return find_index(datasets, name); }

std::vector<TransferMatrix> collect_matrices(const std::vector<RunRecord>& records, const AggregationConfig& cfg) {
  cfg.validate();
  const std::size_t N = cfg.datasets.size();
  std::vector<TransferMatrix> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (const auto& model : cfg.models) {
    for (const auto& policy : cfg.policies) {
      slot[{model, policy}] = out.size();
      out.push_back({model, policy, cfg.datasets, std::vector<std::optional<double>>(N * N)});
    }
  }
  for (const auto& r : records) {
    const auto it = slot.find({r.model, r.policy});
    if (it == slot.end()) continue;
    auto& m = out[it->second];
    const auto s = std::find(cfg.datasets.begin(), cfg.datasets.end(), r.source);
    const auto t = std::find(cfg.datasets.begin(), cfg.datasets.end(), r.target);
    if (s == cfg.datasets.end() || t == cfg.datasets.end()) continue;
    if (s == t && r.policy == "output") continue;
    auto& cell = m.at(static_cast<std::size_t>(s - cfg.datasets.begin()), static_cast<std::size_t>(t - cfg.datasets.begin()));
    const double v = r.roc_auc_pct;
    if (cell && *cell != v) {
      throw RegistryConflict("cell (" + r.model + ", " + r.source + " -> " + r.target + ", " + r.policy +
                             ") recorded with different scores");
    }
    cell = v;
  }
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& m : out) {
    for (std::size_t s = 0; s < N; ++s) {
      for (std::size_t t = 0; t < N; ++t) {
        if (s == t || m.at(s, t)) continue;
        if (n_missing++ < 20) {
          missing += (missing.empty() ? "" : "; ") + std::string("(") + m.model + ", " + cfg.datasets[s] + " -> " +
                     cfg.datasets[t] + ", " + m.policy + ")";
        }
      }
    }
  }
  if (n_missing > 0) {
    throw MissingCell(std::to_string(n_missing) + " missing cell(s): " + missing + (n_missing > 20 ? "; ..." : ""));
  }
  return out;
}

std::vector<double> minmax_normalize(const std::vector<double>& column) {
  if (column.empty()) return {};
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  const double a = *lo, b = *hi;
  std::vector<double> out(column.size(), 0.5);
  if (b > a) {
    for (std::size_t i = 0; i < column.size(); ++i) out[i] = (column[i] - a) / (b - a);
  }
  return out;
}

AggregateMatrix normalize(const TransferMatrix& m) {
  const std::size_t N = m.size();
  if (m.cells.size() != N * N) throw ShapeError("transfer matrix cells do not match its dataset list");
  AggregateMatrix out{m.datasets, std::vector<std::optional<double>>(N * N)};
  for (std::size_t t = 0; t < N; ++t) {
    std::vector<double> col;
    for (std::size_t s = 0; s < N; ++s) {
      if (s == t) continue;
      if (!m.at(s, t)) {
        throw MissingCell("(" + m.model + ", " + m.datasets[s] + " -> " + m.datasets[t] + ", " + m.policy + ")");
      }
      col.push_back(*m.at(s, t));
    }
    const auto norm = minmax_normalize(col);
    std::size_t k = 0;
    for (std::size_t s = 0; s < N; ++s) {
      if (s != t) out.cells[s * N + t] = norm[k++];
    }
  }
  return out;
}

AggregateMatrix aggregate(const std::vector<TransferMatrix>& matrices) {
  if (matrices.empty()) throw ShapeError("aggregate: no matrices");
  const auto& datasets = matrices.front().datasets;
  const std::size_t N = datasets.size();
  std::vector<double> sum(N * N, 0.0);
  for (const auto& m : matrices) {
    if (m.datasets != datasets) {
      throw ShapeError("aggregate: matrix (" + m.model + ", " + m.policy + ") has " + std::to_string(m.size()) +
                       " datasets or a different order, expected " + std::to_string(N));
    }
    const auto n = normalize(m);
    for (std::size_t i = 0; i < N * N; ++i) {
      if (n.cells[i]) sum[i] += *n.cells[i];
    }
  }
  AggregateMatrix out{datasets, std::vector<std::optional<double>>(N * N)};
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t t = 0; t < N; ++t) {
      if (s != t) out.cells[s * N + t] = sum[s * N + t] / static_cast<double>(matrices.size());
    }
  }
  return out;
}

BarSummary bar_summary(const std::vector<TransferMatrix>& matrices, const std::string& policy) {
  if (matrices.empty()) throw ShapeError("bar_summary: no matrices");
  const auto& datasets = matrices.front().datasets;
  const std::size_t N = datasets.size();
  std::vector<double> sum(N * N, 0.0), diag(N, 0.0);
  std::vector<std::size_t> count(N * N, 0), diag_count(N, 0);
  for (const auto& m : matrices) {
    if (m.datasets != datasets) throw ShapeError("bar_summary: matrices disagree on the dataset list");
    for (std::size_t s = 0; s < N; ++s) {
      for (std::size_t t = 0; t < N; ++t) {
        const auto& c = m.at(s, t);
        if (!c) continue;
        if (s == t) {
          if (m.policy == "all") {
            diag[t] += *c;
            ++diag_count[t];
          }
        } else if (m.policy == policy) {
          sum[s * N + t] += *c;
          ++count[s * N + t];
        }
      }
    }
  }
  BarSummary out{policy, datasets, std::vector<std::optional<double>>(N * N)};
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t t = 0; t < N; ++t) {
      if (s == t) {
        if (diag_count[t]) out.cells[s * N + t] = diag[t] / static_cast<double>(diag_count[t]);
      } else if (count[s * N + t]) {
        out.cells[s * N + t] = sum[s * N + t] / static_cast<double>(count[s * N + t]);
      }
    }
  }
  return out;
}

std::vector<std::string> best_source(const AggregateMatrix& agg, const std::string& target) {
  const std::size_t t = agg.index(target);
  double best = -1.0;
  for (std::size_t s = 0; s < agg.size(); ++s) {
    if (agg.at(s, t)) best = std::max(best, *agg.at(s, t));
  }
  std::vector<std::string> out;
  for (std::size_t s = 0; s < agg.size(); ++s) {
    if (agg.at(s, t) && *agg.at(s, t) == best) out.push_back(agg.datasets[s]);
  }
  return out;
}

std::vector<TransferMatrix> select(const std::vector<TransferMatrix>& matrices, const std::string& model,
                                   const std::string& policy) {
  std::vector<TransferMatrix> out;
  for (const auto& m : matrices) {
    if (m.model == model && m.policy == policy) out.push_back(m);
  }
  return out;
}

}  // namespace ccml::analysis
