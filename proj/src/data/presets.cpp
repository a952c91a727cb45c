#include "ccml/data/presets.hpp"

#include <algorithm>
#include <cctype>

#include "ccml/error.hpp"

namespace ccml::data {

const std::vector<DatasetPreset>& dataset_presets() {
  static const std::vector<DatasetPreset> presets{
      {"mtt", "MagnaTagATune", {50, std::nullopt}},
      {"fma", "FMA-medium", {20, std::nullopt}},
      {"lyra", "Lyra", {30, std::nullopt}},
      {"makam", "Turkish-makam", {30, 150.0}},
      {"hindustani", "Hindustani", {20, 780.0}},
      {"carnatic", "Carnatic", {20, 330.0}},
  };
  return presets;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

const DatasetPreset& dataset_preset(const std::string& name) {
  const std::string key = lower(name);
  for (const auto& p : dataset_presets()) {
    if (p.id == key || lower(p.display_name) == key) return p;
  }
  throw ConfigError("unknown dataset preset '" + name + "'");
}

}  // namespace ccml::data
