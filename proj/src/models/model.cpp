#include "ccml/models/model.hpp"

#include "arch.hpp"
#include "ccml/error.hpp"
#include "ccml/nn/init.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::models {

namespace detail {

void add_conv(std::vector<ParamSpec>& specs, const std::string& name, std::size_t out, std::size_t in,
              std::size_t kh, std::size_t kw, bool bias) {
  specs.push_back({name + ".weight", nn::Shape{out, in, kh, kw}, true, InitKind::HeUniform, in * kh * kw, out * kh * kw});
  if (bias) specs.push_back({name + ".bias", nn::Shape{out}, true, InitKind::Zeros, 0, 0});
}

void add_batch_norm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t channels) {
  specs.push_back({prefix + ".gamma", nn::Shape{channels}, true, InitKind::Ones, 0, 0});
  specs.push_back({prefix + ".beta", nn::Shape{channels}, true, InitKind::Zeros, 0, 0});
  specs.push_back({prefix + ".running_mean", nn::Shape{channels}, false, InitKind::Zeros, 0, 0});
  specs.push_back({prefix + ".running_var", nn::Shape{channels}, false, InitKind::Ones, 0, 0});
}

void add_dense(std::vector<ParamSpec>& specs, const std::string& name, std::size_t out, std::size_t in, InitKind init) {
  specs.push_back({name + ".weight", nn::Shape{out, in}, true, init, in, out});
  specs.push_back({name + ".bias", nn::Shape{out}, true, InitKind::Zeros, 0, 0});
}

void add_layer_norm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t dim) {
  specs.push_back({prefix + ".gamma", nn::Shape{dim}, true, InitKind::Ones, 0, 0});
  specs.push_back({prefix + ".beta", nn::Shape{dim}, true, InitKind::Zeros, 0, 0});
}

}  // namespace detail

std::vector<ParamSpec> describe(const ModelConfig& cfg) {
  cfg.validate();
  switch (cfg.arch) {
    case Arch::VggIsh: return detail::describe_vggish(cfg);
    case Arch::Musicnn: return detail::describe_musicnn(cfg);
    case Arch::Ast: return detail::describe_ast(cfg);
  }
  return {};
}

std::size_t parameter_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : describe(cfg)) {
    if (s.trainable) n += s.shape.numel();
  }
  return n;
}

std::string output_layer_prefix(Arch arch) {
  switch (arch) {
    case Arch::VggIsh: return "fc2";
    case Arch::Musicnn: return "back.fc2";
    case Arch::Ast: return "head";
  }
  return "";
}

bool is_output_layer(Arch arch, const std::string& param_name) {
  const std::string prefix = output_layer_prefix(arch) + ".";
  return param_name.compare(0, prefix.size(), prefix) == 0;
}

template <typename T>
void ParameterStore<T>::add(const ParamSpec& spec) {
  if (contains(spec.name)) throw ConfigError("duplicate parameter name '" + spec.name + "'");
  index_.emplace(spec.name, entries_.size());
  entries_.push_back({spec, nn::Tensor<T>::zeros(spec.shape, spec.trainable)});
}

template <typename T>
const nn::Tensor<T>& ParameterStore<T>::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

template <typename T>
nn::Tensor<T>& ParameterStore<T>::operator[](const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

template <typename T>
std::vector<nn::Tensor<T>> ParameterStore<T>::trainable() const {
  std::vector<nn::Tensor<T>> out;
  for (const auto& e : entries_) {
    if (e.spec.trainable && e.tensor.requires_grad()) out.push_back(e.tensor);
  }
  return out;
}

template <typename T>
Model<T>::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  for (const auto& spec : describe(cfg_)) params_.add(spec);
}

namespace {

template <typename T>
void init_tensor(nn::Tensor<T>& t, const ParamSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, fnv1a64(spec.name)));
  switch (spec.init) {
    case InitKind::HeUniform: nn::init::he_uniform(t, spec.fan_in, rng); break;
    case InitKind::XavierUniform: nn::init::xavier_uniform(t, spec.fan_in, spec.fan_out, rng); break;
    case InitKind::Normal002: nn::init::normal(t, 0.0, 0.02, rng); break;
    case InitKind::Zeros: nn::init::constant(t, T{0}); break;
    case InitKind::Ones: nn::init::constant(t, T{1}); break;
  }
}

}  // namespace

template <typename T>
void Model<T>::init_parameters(std::uint64_t seed) {
  for (auto& e : params_.entries()) init_tensor(e.tensor, e.spec, seed);
}

template <typename T>
void Model<T>::init_output_layer(std::uint64_t seed) {
  for (auto& e : params_.entries()) {
    if (is_output_layer(cfg_.arch, e.spec.name)) init_tensor(e.tensor, e.spec, seed);
  }
}

template <typename T>
nn::Tensor<T> Model<T>::forward(const nn::Tensor<T>& x, const ForwardOptions& opt) {
  const nn::Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != 1 || s[2] != cfg_.n_mels || s[3] != cfg_.chunk.n_frames || s[0] == 0) {
    throw ShapeError(std::string(arch_name(cfg_.arch)) + ": expected input [B,1," + std::to_string(cfg_.n_mels) + "," +
                     std::to_string(cfg_.chunk.n_frames) + "], got " + s.str());
  }
  return forward_impl(x, opt);
}

template <typename T>
nn::Tensor<T> Model<T>::batch_norm(const nn::Tensor<T>& x, const std::string& prefix, const ForwardOptions& opt) {
  nn::BatchNormStats<T> stats{params_[prefix + ".running_mean"], params_[prefix + ".running_var"]};
  return nn::batch_norm(x, p(prefix + ".gamma"), p(prefix + ".beta"), stats, opt.training && !opt.freeze_batch_norm);
}

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::unique_ptr<Model<T>> m;
  switch (cfg.arch) {
    case Arch::VggIsh: m = detail::make_vggish<T>(cfg); break;
    case Arch::Musicnn: m = detail::make_musicnn<T>(cfg); break;
    case Arch::Ast: m = std::make_unique<AstModel<T>>(cfg); break;
  }
  m->init_parameters(seed);
  return m;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Model<float>;
template class Model<double>;
template std::unique_ptr<Model<float>> build_model(const ModelConfig&, std::uint64_t);
template std::unique_ptr<Model<double>> build_model(const ModelConfig&, std::uint64_t);

}  // namespace ccml::models
