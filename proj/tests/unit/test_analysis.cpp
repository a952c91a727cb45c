#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ccml/analysis/matrix.hpp"
#include "ccml/analysis/table_io.hpp"
#include "ccml/error.hpp"
#include "ccml/util/rng.hpp"
#include "doctest.h"

using namespace ccml;
using namespace ccml::analysis;

namespace {

std::vector<TransferMatrix> published() {
  return load_score_table(std::filesystem::path(CCML_FIXTURE_DIR) / "published_scores.csv");
}

const std::vector<std::string> kDatasets{"MagnaTagATune", "FMA-medium", "Lyra", "Turkish-makam", "Hindustani", "Carnatic"};

TransferMatrix random_matrix(Rng& rng, std::size_t N, const std::string& model, const std::string& policy) {
  TransferMatrix m{model, policy, {}, std::vector<std::optional<double>>(N * N)};
  for (std::size_t i = 0; i < N; ++i) m.datasets.push_back("d" + std::to_string(i));
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t t = 0; t < N; ++t) {
      if (s != t || policy == "all") m.at(s, t) = std::round(rng.uniform(50, 95) * 100) / 100;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("fixture shape") {
  const auto ms = published();
  REQUIRE(ms.size() == 6);
  for (const auto& m : ms) {
    CHECK(m.datasets == kDatasets);
    for (std::size_t s = 0; s < 6; ++s) {
      CHECK(m.at(s, s).has_value() == (m.policy == "all"));
      for (std::size_t t = 0; t < 6; ++t) {
        if (s != t) {
          REQUIRE(m.at(s, t).has_value());
          CHECK(*m.at(s, t) >= 0.0);
          CHECK(*m.at(s, t) <= 100.0);
        }
      }
    }
  }
  CHECK(ms[0].model == "VGG-ish");
  CHECK(ms[0].policy == "output");
  CHECK(*ms[0].at(1, 0) == 85.82);
}

TEST_CASE("minmax_normalize") {
  CHECK(minmax_normalize({3.0, 1.0}) == std::vector<double>{1.0, 0.0});
  CHECK(minmax_normalize({7.0, 7.0, 7.0}) == std::vector<double>{0.5, 0.5, 0.5});
  const auto v = minmax_normalize({85.82, 84.34, 85.19, 84.24, 84.18});
  // (x - 84.18) / 1.64
  const std::vector<double> expect{1.0, 0.16 / 1.64, 1.01 / 1.64, 0.06 / 1.64, 0.0};
  for (std::size_t i = 0; i < 5; ++i) CHECK(v[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("normalization is invariant to affine rescaling of a column") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> col(2 + rng.below(8));
    for (auto& x : col) x = rng.uniform(40, 95);
    const double a = rng.uniform(0.1, 10), b = rng.uniform(-50, 50);
    std::vector<double> scaled;
    for (double x : col) scaled.push_back(a * x + b);
    const auto n0 = minmax_normalize(col), n1 = minmax_normalize(scaled);
    for (std::size_t i = 0; i < col.size(); ++i) CHECK(n1[i] == doctest::Approx(n0[i]).epsilon(1e-9));
    CHECK(std::max_element(n0.begin(), n0.end()) - n0.begin() == std::max_element(n1.begin(), n1.end()) - n1.begin());
  }
}

TEST_CASE("VGG-ish output-only MagnaTagATune column") {
  const auto ms = published();
  const auto n = normalize(select(ms, "VGG-ish", "output").at(0));
  const std::vector<double> expect{1.0, 0.09756, 0.61585, 0.03659, 0.0};
  for (std::size_t s = 1; s < 6; ++s) CHECK(std::fabs(*n.at(s, 0) - expect[s - 1]) <= 1e-4);
  CHECK_FALSE(n.at(0, 0).has_value());
}

TEST_CASE("aggregate over all six matrices") {
  const auto ms = published();
  const auto agg = aggregate(ms);
  CHECK(std::fabs(*agg.at(agg.index("FMA-medium"), agg.index("MagnaTagATune")) - 1.0) <= 1e-9);
  CHECK(best_source(agg, "MagnaTagATune") == std::vector<std::string>{"FMA-medium"});
  for (std::size_t t = 0; t < 6; ++t) {
    double hi = 0;
    for (std::size_t s = 0; s < 6; ++s) {
      if (s == t) {
        CHECK_FALSE(agg.at(s, t).has_value());
        continue;
      }
      CHECK(*agg.at(s, t) >= 0.0);
      CHECK(*agg.at(s, t) <= 1.0);
      hi = std::max(hi, *agg.at(s, t));
    }
    CHECK(best_source(agg, kDatasets[t]).size() >= 1);
  }
  // Independent recomputation of one cell: Lyra -> Carnatic.
  double sum = 0;
  for (const auto& m : ms) {
    std::vector<double> col;
    for (std::size_t s = 0; s < 5; ++s) col.push_back(*m.at(s, 5));
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    sum += (col[2] - *lo) / (*hi - *lo);
  }
  CHECK(*agg.at(2, 5) == doctest::Approx(sum / 6).epsilon(1e-12));
}

TEST_CASE("aggregate of one matrix equals its normalization") {
  const auto ms = published();
  CHECK(aggregate({ms[3]}) == normalize(ms[3]));
}

TEST_CASE("best source per matrix") {
  const auto ms = published();
  CHECK(best_source(aggregate(select(ms, "Musicnn", "all")), "Carnatic") == std::vector<std::string>{"Hindustani"});
  CHECK(best_source(aggregate(select(ms, "Musicnn", "output")), "Lyra") == std::vector<std::string>{"MagnaTagATune"});
  CHECK(best_source(aggregate(select(ms, "AST", "all")), "Turkish-makam") == std::vector<std::string>{"FMA-medium"});
  // Tie at the top lists both.
  TransferMatrix m{"x", "output", {"a", "b", "c"}, std::vector<std::optional<double>>(9)};
  m.at(0, 2) = 80;
  m.at(1, 2) = 80;
  m.at(2, 0) = m.at(1, 0) = 1;
  m.at(0, 1) = m.at(2, 1) = 1;
  CHECK(best_source(aggregate({m}), "c") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("bar summary") {
  const auto ms = published();
  const auto bars = bar_summary(ms, "output");
  CHECK(*bars.at(1, 0) == doctest::Approx((85.82 + 85.52 + 88.63) / 3).epsilon(1e-12));
  CHECK(std::fabs(*bars.at(1, 0) - 86.6566) <= 1e-3);
  // The diagonal is the single-domain reference from the "all" matrices.
  CHECK(*bars.at(0, 0) == doctest::Approx((91.23 + 90.19 + 91.72) / 3).epsilon(1e-12));
  // Single model: bars equal the raw scores.
  const auto one = bar_summary(select(ms, "AST", "output"), "output");
  CHECK(*one.at(2, 3) == *ms[4].at(2, 3));
  // Lyra has the widest spread of source bars.
  std::size_t widest = 0;
  double widest_spread = -1;
  for (std::size_t t = 0; t < 6; ++t) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t s = 0; s < 6; ++s) {
      if (s == t) continue;
      lo = std::min(lo, *bars.at(s, t));
      hi = std::max(hi, *bars.at(s, t));
    }
    if (hi - lo > widest_spread) {
      widest_spread = hi - lo;
      widest = t;
    }
  }
  CHECK(kDatasets[widest] == "Lyra");
}

TEST_CASE("dataset relabeling commutes with aggregation") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t N = 3 + rng.below(5);
    std::vector<TransferMatrix> ms;
    for (const char* model : {"m0", "m1"}) {
      for (const char* p : {"output", "all"}) ms.push_back(random_matrix(rng, N, model, p));
    }
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    std::vector<TransferMatrix> permuted;
    for (const auto& m : ms) {
      TransferMatrix p = m;
      for (std::size_t i = 0; i < N; ++i) p.datasets[i] = m.datasets[perm[i]];
      for (std::size_t s = 0; s < N; ++s) {
        for (std::size_t t = 0; t < N; ++t) p.at(s, t) = m.at(perm[s], perm[t]);
      }
      permuted.push_back(p);
    }
    const auto a = aggregate(ms), b = aggregate(permuted);
    for (std::size_t s = 0; s < N; ++s) {
      for (std::size_t t = 0; t < N; ++t) CHECK(b.at(s, t) == a.at(perm[s], perm[t]));
    }
  }
}

TEST_CASE("unanimous argmax carries over to the aggregate") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TransferMatrix> ms;
    for (const char* model : {"m0", "m1", "m2"}) ms.push_back(random_matrix(rng, 5, model, "output"));
    for (auto& m : ms) m.at(2, 4) = 99.0;  // every matrix prefers d2 for target d4
    CHECK(best_source(aggregate(ms), "d4") == std::vector<std::string>{"d2"});
  }
}

TEST_CASE("registry: collect, conflicts, missing cells") {
  const auto ms = published();
  const auto records = records_from_matrices(ms);
  CHECK(records.size() == 6 * 30 + 3 * 6);
  const auto cfg = config_from_records(records);
  CHECK(cfg.datasets == kDatasets);
  CHECK(cfg.models.size() == 3);
  CHECK(collect_matrices(records, cfg) == ms);

  auto dup = records;
  dup.push_back(dup[5]);
  CHECK_NOTHROW(collect_matrices(dup, cfg));
  dup.back().roc_auc_pct += 0.01;
  CHECK_THROWS_AS(collect_matrices(dup, cfg), RegistryConflict);

  auto missing = records;
  missing.erase(missing.begin() + 7);
  try {
    collect_matrices(missing, cfg);
    FAIL("expected MissingCell");
  } catch (const MissingCell& e) {
    const std::string what = e.what();
    CHECK(what.find(records[7].source + " -> " + records[7].target) != std::string::npos);
    CHECK(what.find(records[7].model) != std::string::npos);
  }

  // JSONL round trip.
  const auto dir = std::filesystem::temp_directory_path() / "ccml_test_registry";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (const auto& r : records) append_run_record(dir / "runs.jsonl", r);
  CHECK(collect_matrices(load_registry(dir / "runs.jsonl"), cfg) == ms);
  CHECK_THROWS_AS(parse_registry("{\"model\": \"x\"}\n"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("inconsistent dataset lists raise ShapeError") {
  const auto ms = published();
  Rng rng(1);
  CHECK_THROWS_AS(aggregate({ms[0], random_matrix(rng, 4, "x", "output")}), ShapeError);
}

TEST_CASE("CSV emission round trips") {
  const auto ms = published();
  CHECK(parse_score_table(score_table_csv(ms)) == ms);
  const auto agg = aggregate(ms);
  CHECK(parse_aggregate_csv(aggregate_csv(agg)) == agg);
  const auto dir = std::filesystem::temp_directory_path() / "ccml_test_emit";
  std::filesystem::remove_all(dir);
  const auto files = emit_analysis(ms, dir);
  CHECK(std::filesystem::exists(dir / "aggregate_matrix.csv"));
  CHECK(std::filesystem::exists(dir / "bars_output.csv"));
  CHECK(std::filesystem::exists(dir / "bars_all.csv"));
  CHECK(parse_aggregate_csv(read_text_file(dir / "aggregate_matrix.csv")) == agg);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(parse_score_table("model,source,a:output\nx,a,abc\n"), DataError);
}
