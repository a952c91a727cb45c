#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ccml::nn {

enum class OptimizerKind { Adam, Sgd };

enum class SchedulePolicy {
  AdamConstant,  // Adam at the base rate throughout
  MixedAdamSgd,  // Adam for the first half, then SGD (momentum 0.9), x0.2 at 80%
  AstAdamDecay,  // Adam; base rate through epoch 5, then x0.85 per epoch
};

std::string_view policy_name(SchedulePolicy p) noexcept;
/// Throws ConfigError on an unknown name.
SchedulePolicy parse_policy(std::string_view name);

struct ScheduleStep {
  OptimizerKind optimizer;
  double learning_rate;
  double momentum;  // SGD only
};

struct LrSchedule {
  SchedulePolicy policy = SchedulePolicy::AdamConstant;
  double base_lr = 1e-4;
  std::size_t max_epochs = 1;

  /// `epoch` is 1-based.
  ScheduleStep at(std::size_t epoch) const;
};

/// Rate of the AST policy with the default 1e-5 base.
double ast_learning_rate(std::size_t epoch);

}  // namespace ccml::nn
