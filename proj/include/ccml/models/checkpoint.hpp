#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ccml/models/model.hpp"

namespace ccml::models {

struct Provenance {
  std::string source_dataset_id;
  std::size_t epochs_trained = 0;
  /// Git blob id of the serialized tensor data; filled in by capture().
  std::string content_hash;
  std::string experiment_id;

  Json to_json() const;
  static Provenance from_json(const Json& j);
  bool operator==(const Provenance&) const = default;
};

struct NamedTensor {
  std::string name;
  nn::Shape shape;
  std::vector<float> data;
};

/// Architecture, tag vocabulary, provenance and every manifest tensor (batch
/// norm running statistics included), in manifest order.
struct ModelCheckpoint {
  ModelConfig config;
  std::vector<std::string> vocabulary;
  Provenance provenance;
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const;  // CheckpointError when absent
  /// Git blob id of the concatenated little-endian tensor bytes.
  std::string content_hash() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
ModelCheckpoint capture(const Model<T>& model, std::vector<std::string> vocabulary, Provenance provenance);

/// Verifies the manifest against the config, then writes atomically.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
/// CheckpointError naming the offending field on any malformed input.
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint parse_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin = "checkpoint");

/// Every manifest name appears exactly once with the shape the config implies.
void verify_manifest(const ModelCheckpoint& ckpt);

/// New model with all tensors copied from the checkpoint.
template <typename T>
std::unique_ptr<Model<T>> instantiate(const ModelCheckpoint& ckpt);

/// Copies tensors whose (mapped) names pass `select` into `model`. Names the
/// model does not have are skipped; a shape mismatch raises CheckpointError.
/// Returns the model-side names that were written. This is the hook for
/// externally converted weights as well as for transfer.
template <typename T>
std::vector<std::string> import_weights(Model<T>& model, const ModelCheckpoint& ckpt,
                                        const std::function<bool(const std::string&)>& select = {},
                                        const std::function<std::string(const std::string&)>& rename = {});

}  // namespace ccml::models
