#include "ccml/eval/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "ccml/error.hpp"

namespace ccml::eval {

namespace {

void check_sizes(std::span<const double> s, std::span<const std::uint8_t> y) {
  if (s.size() != y.size()) throw ShapeError("metrics: scores and labels differ in length");
}

std::vector<std::size_t> order_by_score(std::span<const double> s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  return idx;
}

}  // namespace

std::optional<double> roc_auc(std::span<const double> s, std::span<const std::uint8_t> y) {
  check_sizes(s, y);
  const auto idx = order_by_score(s);
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && s[idx[j]] == s[idx[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (y[idx[k]]) {
        rank_sum += avg;
        pos += 1;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(s.size()) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

std::optional<double> pr_auc(std::span<const double> s, std::span<const std::uint8_t> y) {
  check_sizes(s, y);
  auto idx = order_by_score(s);
  std::reverse(idx.begin(), idx.end());
  const double total_pos = static_cast<double>(std::count_if(y.begin(), y.end(), [](auto v) { return v != 0; }));
  if (total_pos == 0) return std::nullopt;
  double tp = 0, fp = 0, prev_recall = 0, ap = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && s[idx[j]] == s[idx[i]]) {
      (y[idx[j]] ? tp : fp) += 1;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

}  // namespace ccml::eval
