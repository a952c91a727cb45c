#pragma once

#include <string>
#include <vector>

#include "ccml/data/vocabulary.hpp"

namespace ccml::data {

/// Per-corpus vocabulary size and duration cap.
struct DatasetPreset {
  std::string id;            // "mtt", "fma", "lyra", "makam", "hindustani", "carnatic"
  std::string display_name;  // "MagnaTagATune", ...
  DatasetConfig config;
};

const std::vector<DatasetPreset>& dataset_presets();
/// Case-insensitive lookup by id or display name; ConfigError when unknown.
const DatasetPreset& dataset_preset(const std::string& name);

}  // namespace ccml::data
