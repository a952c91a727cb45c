#include "ccml/analysis/table_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "ccml/error.hpp"

namespace ccml::analysis {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

std::optional<double> parse_cell(const std::string& s, const std::string& where) {
  if (s.empty() || s == "-") return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(where + ": '" + s + "' is not a number");
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest form that still round-trips.
  for (int p = 1; p <= 17; ++p) {
    char t[32];
    std::snprintf(t, sizeof t, "%.*g", p, v);
    if (std::strtod(t, nullptr) == v) return t;
  }
  return buf;
}

template <typename List>
void add_unique(List& list, const std::string& v) {
  if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

std::vector<TransferMatrix> parse_score_table(const std::string& text, const std::string& origin) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(origin + ": empty table");
  const auto header = split_csv(lines[0]);
  if (header.size() < 3 || header[0] != "model" || header[1] != "source") {
    throw DataError(origin + ":1: header must start with 'model,source'");
  }
  std::vector<std::string> datasets, policies, models;
  std::vector<std::pair<std::string, std::string>> columns;  // (target, policy)
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto colon = header[c].rfind(':');
    if (colon == std::string::npos) throw DataError(origin + ":1: column '" + header[c] + "' is not <target>:<policy>");
    columns.emplace_back(header[c].substr(0, colon), header[c].substr(colon + 1));
    add_unique(datasets, columns.back().first);
    add_unique(policies, columns.back().second);
  }
  struct Row {
    std::string model, source;
    std::vector<std::optional<double>> cells;
  };
  std::vector<Row> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(n + 1);
    auto f = split_csv(lines[n]);
    if (f.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    Row r{f[0], f[1], {}};
    for (std::size_t c = 2; c < f.size(); ++c) r.cells.push_back(parse_cell(f[c], where));
    add_unique(models, r.model);
    rows.push_back(std::move(r));
  }
  const std::size_t N = datasets.size();
  std::vector<TransferMatrix> out;
  for (const auto& model : models) {
    for (const auto& policy : policies) {
      TransferMatrix m{model, policy, datasets, std::vector<std::optional<double>>(N * N)};
      for (const auto& r : rows) {
        if (r.model != model) continue;
        const auto s = std::find(datasets.begin(), datasets.end(), r.source);
        if (s == datasets.end()) throw DataError(origin + ": source '" + r.source + "' is not a target column");
        for (std::size_t c = 0; c < columns.size(); ++c) {
          if (columns[c].second != policy) continue;
          m.at(static_cast<std::size_t>(s - datasets.begin()), m.index(columns[c].first)) = r.cells[c];
        }
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<TransferMatrix> load_score_table(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  return parse_score_table(text, path.string());
}

std::string score_table_csv(const std::vector<TransferMatrix>& matrices) {
  const auto cfg = config_from_matrices(matrices);
  std::ostringstream out;
  out << "model,source";
  for (const auto& t : cfg.datasets) {
    for (const auto& p : cfg.policies) out << ',' << t << ':' << p;
  }
  out << '\n';
  for (const auto& model : cfg.models) {
    for (const auto& s : cfg.datasets) {
      out << model << ',' << s;
      for (const auto& t : cfg.datasets) {
        for (const auto& p : cfg.policies) {
          out << ',';
          for (const auto& m : matrices) {
            if (m.model == model && m.policy == p && m.at(m.index(s), m.index(t))) out << fmt(*m.at(m.index(s), m.index(t)));
          }
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

std::vector<RunRecord> records_from_matrices(const std::vector<TransferMatrix>& matrices) {
  std::vector<RunRecord> out;
  for (const auto& m : matrices) {
    for (std::size_t s = 0; s < m.size(); ++s) {
      for (std::size_t t = 0; t < m.size(); ++t) {
        if (!m.at(s, t)) continue;
        RunRecord r;
        r.model = m.model;
        r.source = m.datasets[s];
        r.target = m.datasets[t];
        r.policy = m.policy;
        r.roc_auc_pct = *m.at(s, t);
        out.push_back(r);
      }
    }
  }
  return out;
}

AggregationConfig config_from_matrices(const std::vector<TransferMatrix>& matrices) {
  AggregationConfig c;
  c.policies.clear();
  for (const auto& m : matrices) {
    for (const auto& d : m.datasets) add_unique(c.datasets, d);
    add_unique(c.models, m.model);
    add_unique(c.policies, m.policy);
  }
  return c;
}

AggregationConfig config_from_records(const std::vector<RunRecord>& records) {
  AggregationConfig c;
  c.policies.clear();
  for (const auto& r : records) {
    add_unique(c.datasets, r.source);
    add_unique(c.datasets, r.target);
    add_unique(c.models, r.model);
    add_unique(c.policies, r.policy);
  }
  return c;
}

std::string aggregate_csv(const AggregateMatrix& agg) {
  std::ostringstream out;
  out << "source";
  for (const auto& t : agg.datasets) out << ',' << t;
  out << '\n';
  for (std::size_t s = 0; s < agg.size(); ++s) {
    out << agg.datasets[s];
    for (std::size_t t = 0; t < agg.size(); ++t) {
      out << ',';
      if (agg.at(s, t)) out << fmt(*agg.at(s, t));
    }
    out << '\n';
  }
  return out.str();
}

AggregateMatrix parse_aggregate_csv(const std::string& text, const std::string& origin) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(origin + ": empty file");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "source") throw DataError(origin + ":1: header must start with 'source'");
  AggregateMatrix m;
  m.datasets.assign(header.begin() + 1, header.end());
  const std::size_t N = m.datasets.size();
  m.cells.resize(N * N);
  std::size_t row = 0;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(n + 1);
    const auto f = split_csv(lines[n]);
    if (f.size() != N + 1 || row >= N || f[0] != m.datasets[row]) throw DataError(where + ": malformed row");
    for (std::size_t t = 0; t < N; ++t) m.cells[row * N + t] = parse_cell(f[t + 1], where);
    ++row;
  }
  if (row != N) throw DataError(origin + ": expected " + std::to_string(N) + " rows");
  return m;
}

std::string bars_csv(const BarSummary& bars) {
  std::ostringstream out;
  out << "target,source,mean_roc_auc,single_domain\n";
  for (std::size_t t = 0; t < bars.size(); ++t) {
    for (std::size_t s = 0; s < bars.size(); ++s) {
      if (!bars.at(s, t)) continue;
      out << bars.datasets[t] << ',' << bars.datasets[s] << ',' << fmt(*bars.at(s, t)) << ',' << (s == t ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

EmittedFiles emit_analysis(const std::vector<TransferMatrix>& matrices, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  EmittedFiles out;
  const auto agg = aggregate(matrices);
  auto write = [&](const std::string& name, const std::string& body) {
    write_file_atomic(dir / name, body);
    out.files.push_back(dir / name);
  };
  write("aggregate_matrix.csv", aggregate_csv(agg));

  Json j{{"datasets", agg.datasets}};
  Json rows = Json::array();
  for (std::size_t s = 0; s < agg.size(); ++s) {
    Json row = Json::array();
    for (std::size_t t = 0; t < agg.size(); ++t) row.push_back(agg.at(s, t) ? Json(*agg.at(s, t)) : Json(nullptr));
    rows.push_back(row);
  }
  j["cells"] = rows;
  Json best = Json::object();
  std::ostringstream best_csv;
  best_csv << "target,best_sources\n";
  for (const auto& t : agg.datasets) {
    const auto b = best_source(agg, t);
    best[t] = b;
    best_csv << t << ',';
    for (std::size_t i = 0; i < b.size(); ++i) best_csv << (i ? "|" : "") << b[i];
    best_csv << '\n';
  }
  j["best_source"] = best;
  write("aggregate_matrix.json", j.dump(2) + "\n");
  write("best_sources.csv", best_csv.str());

  std::vector<std::string> policies;
  for (const auto& m : matrices) add_unique(policies, m.policy);
  for (const auto& p : policies) write("bars_" + p + ".csv", bars_csv(bar_summary(matrices, p)));
  return out;
}

}  // namespace ccml::analysis
