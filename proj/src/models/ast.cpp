#include <cmath>

#include "arch.hpp"
#include "ccml/error.hpp"

namespace ccml::models {

namespace detail {

std::vector<ParamSpec> describe_ast(const ModelConfig& cfg) {
  const auto& a = cfg.ast;
  const std::size_t D = cfg.ast_embed_dim(), hidden = D * a.mlp_ratio;
  const std::size_t patch_dim = a.patch * a.patch;
  const auto [gh, gw] = cfg.ast_grid();
  std::vector<ParamSpec> specs;
  add_dense(specs, "patch_embed", D, patch_dim, InitKind::XavierUniform);
  specs.push_back({"cls_token", nn::Shape{1, 1, D}, true, InitKind::Normal002, 0, 0});
  specs.push_back({"pos_embed", nn::Shape{1, gh * gw + 1, D}, true, InitKind::Normal002, 0, 0});
  for (std::size_t l = 0; l < a.n_layers; ++l) {
    const std::string b = "blocks." + std::to_string(l) + ".";
    add_layer_norm(specs, b + "norm1", D);
    for (const char* n : {"attn.q", "attn.k", "attn.v", "attn.proj"}) add_dense(specs, b + n, D, D, InitKind::XavierUniform);
    add_layer_norm(specs, b + "norm2", D);
    add_dense(specs, b + "mlp.fc1", hidden, D, InitKind::XavierUniform);
    add_dense(specs, b + "mlp.fc2", D, hidden, InitKind::XavierUniform);
  }
  add_layer_norm(specs, "norm", D);
  add_dense(specs, "head", cfg.n_tags, D, InitKind::XavierUniform);
  return specs;
}

}  // namespace detail

template <typename T>
nn::Tensor<T> AstModel<T>::forward_impl(const nn::Tensor<T>& x, const ForwardOptions& opt) {
  const auto& a = this->cfg_.ast;
  return forward_patches(nn::extract_patches(x, a.patch, a.patch, a.patch_stride, a.patch_stride), opt);
}

template <typename T>
nn::Tensor<T> AstModel<T>::forward_patches(const nn::Tensor<T>& patches, const ForwardOptions& opt) {
  (void)opt;  // no dropout or batch norm in this architecture
  const auto& a = this->cfg_.ast;
  const std::size_t D = this->cfg_.ast_embed_dim();
  const auto [gh, gw] = this->cfg_.ast_grid();
  const nn::Shape& s = patches.shape();
  if (s.rank() != 3 || s[1] != gh * gw || s[2] != a.patch * a.patch || s[0] == 0) {
    throw ShapeError("ast: expected patches [B," + std::to_string(gh * gw) + "," + std::to_string(a.patch * a.patch) +
                     "], got " + s.str());
  }
  const std::size_t B = s[0];
  auto h = nn::dense(patches, this->p("patch_embed.weight"), this->p("patch_embed.bias"));
  h = nn::concat(std::vector<nn::Tensor<T>>{nn::broadcast_batch(this->p("cls_token"), B), h}, 1);
  h = nn::embedding_add(h, this->p("pos_embed"));
  for (std::size_t l = 0; l < a.n_layers; ++l) {
    const std::string b = "blocks." + std::to_string(l) + ".";
    auto n1 = nn::layer_norm(h, this->p(b + "norm1.gamma"), this->p(b + "norm1.beta"));
    auto q = nn::dense(n1, this->p(b + "attn.q.weight"), this->p(b + "attn.q.bias"));
    auto k = nn::dense(n1, this->p(b + "attn.k.weight"), this->p(b + "attn.k.bias"));
    auto v = nn::dense(n1, this->p(b + "attn.v.weight"), this->p(b + "attn.v.bias"));
    auto att = nn::scaled_dot_product_attention(q, k, v, a.n_heads);
    h = nn::add(h, nn::dense(att, this->p(b + "attn.proj.weight"), this->p(b + "attn.proj.bias")));
    auto n2 = nn::layer_norm(h, this->p(b + "norm2.gamma"), this->p(b + "norm2.beta"));
    auto m = nn::gelu(nn::dense(n2, this->p(b + "mlp.fc1.weight"), this->p(b + "mlp.fc1.bias")));
    h = nn::add(h, nn::dense(m, this->p(b + "mlp.fc2.weight"), this->p(b + "mlp.fc2.bias")));
  }
  h = nn::layer_norm(h, this->p("norm.gamma"), this->p("norm.beta"));
  auto cls = nn::reshape(nn::slice(h, 1, 0, 1), nn::Shape{B, D});
  return nn::dense(cls, this->p("head.weight"), this->p("head.bias"));
}

template class AstModel<float>;
template class AstModel<double>;

}  // namespace ccml::models
