#include "ccml/nn/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "ccml/error.hpp"

namespace ccml::nn {

std::string_view policy_name(SchedulePolicy p) noexcept {
  switch (p) {
    case SchedulePolicy::AdamConstant: return "adam_constant";
    case SchedulePolicy::MixedAdamSgd: return "mixed_adam_sgd";
    case SchedulePolicy::AstAdamDecay: return "ast_adam_decay";
  }
  return "?";
}

SchedulePolicy parse_policy(std::string_view name) {
  for (auto p : {SchedulePolicy::AdamConstant, SchedulePolicy::MixedAdamSgd, SchedulePolicy::AstAdamDecay}) {
    if (policy_name(p) == name) return p;
  }
  throw ConfigError("unknown schedule policy '" + std::string(name) + "'");
}

ScheduleStep LrSchedule::at(std::size_t epoch) const {
  if (epoch == 0) throw ConfigError("epochs are numbered from 1");
  switch (policy) {
    case SchedulePolicy::AdamConstant:
      return {OptimizerKind::Adam, base_lr, 0.0};
    case SchedulePolicy::AstAdamDecay: {
      const double decay = epoch <= 5 ? 1.0 : std::pow(0.85, static_cast<double>(epoch - 5));
      return {OptimizerKind::Adam, base_lr * decay, 0.0};
    }
    case SchedulePolicy::MixedAdamSgd: {
      const std::size_t adam_epochs = std::max<std::size_t>(1, max_epochs / 2);
      if (epoch <= adam_epochs) return {OptimizerKind::Adam, base_lr, 0.0};
      const auto drop_after = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(max_epochs)));
      return {OptimizerKind::Sgd, epoch > drop_after ? base_lr * 0.2 : base_lr, 0.9};
    }
  }
  return {OptimizerKind::Adam, base_lr, 0.0};
}

double ast_learning_rate(std::size_t epoch) {
  return LrSchedule{SchedulePolicy::AstAdamDecay, 1e-5, 0}.at(epoch).learning_rate;
}

}  // namespace ccml::nn
