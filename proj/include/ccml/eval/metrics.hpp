#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace ccml::eval {

/// Mann-Whitney statistic P(s+ > s-) + P(tie)/2 via average ranks.
/// nullopt (tag skipped) unless both classes occur. Labels are 0/1.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Average precision sum_k (R_k - R_{k-1}) P_k over descending distinct
/// score thresholds (tied scores enter together). nullopt without positives.
std::optional<double> pr_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace ccml::eval
