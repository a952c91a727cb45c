#pragma once

// Internal: per-architecture manifests and constructors.

#include <memory>
#include <string>
#include <vector>

#include "ccml/models/model.hpp"

namespace ccml::models::detail {

void add_conv(std::vector<ParamSpec>& specs, const std::string& name, std::size_t out, std::size_t in,
              std::size_t kh, std::size_t kw, bool bias);
void add_batch_norm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t channels);
void add_dense(std::vector<ParamSpec>& specs, const std::string& name, std::size_t out, std::size_t in,
               InitKind init = InitKind::HeUniform);
void add_layer_norm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t dim);

std::vector<ParamSpec> describe_vggish(const ModelConfig& cfg);
std::vector<ParamSpec> describe_musicnn(const ModelConfig& cfg);
std::vector<ParamSpec> describe_ast(const ModelConfig& cfg);

template <typename T>
std::unique_ptr<Model<T>> make_vggish(const ModelConfig& cfg);
template <typename T>
std::unique_ptr<Model<T>> make_musicnn(const ModelConfig& cfg);

}  // namespace ccml::models::detail
