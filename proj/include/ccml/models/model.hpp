#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ccml/models/config.hpp"
#include "ccml/nn/ops.hpp"

namespace ccml::models {

enum class InitKind { HeUniform, XavierUniform, Normal002, Zeros, Ones };

/// One entry of an architecture's tensor manifest.
struct ParamSpec {
  std::string name;
  nn::Shape shape;
  bool trainable = true;  // false: batch-norm running statistics
  InitKind init = InitKind::Zeros;
  std::size_t fan_in = 0, fan_out = 0;
};

/// Ordered manifest of every tensor `cfg` instantiates. Pure function of cfg.
std::vector<ParamSpec> describe(const ModelConfig& cfg);

/// Number of trainable scalars (running statistics excluded).
std::size_t parameter_count(const ModelConfig& cfg);

/// Name prefix of the layer replaced on transfer ("fc2", "back.fc2", "head").
std::string output_layer_prefix(Arch arch);
bool is_output_layer(Arch arch, const std::string& param_name);

template <typename T>
class ParameterStore {
 public:
  struct Entry {
    ParamSpec spec;
    nn::Tensor<T> tensor;
  };

  void add(const ParamSpec& spec);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  /// ConfigError on an unknown name.
  const nn::Tensor<T>& operator[](const std::string& name) const;
  nn::Tensor<T>& operator[](const std::string& name);

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// Trainable tensors whose requires_grad flag is set.
  std::vector<nn::Tensor<T>> trainable() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct ForwardOptions {
  bool training = false;
  /// Batch norm uses and keeps its running statistics even when training
  /// (used when the backbone is frozen).
  bool freeze_batch_norm = false;
  std::uint64_t dropout_seed = 0;
};

/// Maps [B, 1, n_mels, chunk_frames] log-mel batches to [B, n_tags] logits.
template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg);
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore<T>& params() noexcept { return params_; }
  const ParameterStore<T>& params() const noexcept { return params_; }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, const ForwardOptions& opt = {});

  /// Re-draws every tensor from `seed`. Each tensor's stream is derived from
  /// (seed, name), so initialization does not depend on manifest order.
  void init_parameters(std::uint64_t seed);
  /// Re-draws only the output layer.
  void init_output_layer(std::uint64_t seed);

 protected:
  virtual nn::Tensor<T> forward_impl(const nn::Tensor<T>& x, const ForwardOptions& opt) = 0;

  nn::Tensor<T> batch_norm(const nn::Tensor<T>& x, const std::string& prefix, const ForwardOptions& opt);
  const nn::Tensor<T>& p(const std::string& name) const { return params_[name]; }

  ModelConfig cfg_;
  ParameterStore<T> params_;
};

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Audio Spectrogram Transformer with its patch-level entry point exposed.
template <typename T>
class AstModel final : public Model<T> {
 public:
  explicit AstModel(ModelConfig cfg) : Model<T>(std::move(cfg)) {}
  /// patches [B, P, patch*patch] -> logits, skipping patch extraction.
  nn::Tensor<T> forward_patches(const nn::Tensor<T>& patches, const ForwardOptions& opt = {});

 protected:
  nn::Tensor<T> forward_impl(const nn::Tensor<T>& x, const ForwardOptions& opt) override;
};

}  // namespace ccml::models
