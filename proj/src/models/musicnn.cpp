#include "arch.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::models::detail {

namespace {

std::size_t frontend_channels(const ModelConfig& cfg) {
  return cfg.musicnn.vertical_heights.size() * cfg.scaled(cfg.musicnn.vertical_channels) +
         cfg.musicnn.horizontal_widths.size() * cfg.scaled(cfg.musicnn.horizontal_channels);
}

}  // namespace

std::vector<ParamSpec> describe_musicnn(const ModelConfig& cfg) {
  const auto& m = cfg.musicnn;
  std::vector<ParamSpec> specs;
  const auto heights = cfg.musicnn_vertical_heights();
  const std::size_t cv = cfg.scaled(m.vertical_channels), chz = cfg.scaled(m.horizontal_channels);
  for (std::size_t j = 0; j < heights.size(); ++j) {
    const std::string n = "front.vert" + std::to_string(j + 1);
    add_conv(specs, n + ".conv", cv, 1, heights[j], m.vertical_width, false);
    add_batch_norm(specs, n + ".bn", cv);
  }
  for (std::size_t j = 0; j < m.horizontal_widths.size(); ++j) {
    const std::string n = "front.horiz" + std::to_string(j + 1);
    add_conv(specs, n + ".conv", chz, 1, 1, m.horizontal_widths[j], false);
    add_batch_norm(specs, n + ".bn", chz);
  }
  const std::size_t front = frontend_channels(cfg), mid = cfg.scaled(m.midend_channels);
  std::size_t in = front;
  for (std::size_t k = 0; k < m.midend_layers; ++k) {
    const std::string n = "mid.conv" + std::to_string(k + 1);
    add_conv(specs, n, mid, in, 1, m.midend_kernel, false);
    add_batch_norm(specs, "mid.bn" + std::to_string(k + 1), mid);
    in = mid;
  }
  const std::size_t pooled = 2 * (front + m.midend_layers * mid);  // max and mean over time
  const std::size_t dense = cfg.scaled(m.dense_dim);
  add_dense(specs, "back.fc1", dense, pooled);
  add_batch_norm(specs, "back.bn", dense);
  add_dense(specs, "back.fc2", cfg.n_tags, dense);
  return specs;
}

namespace {

template <typename T>
class Musicnn final : public Model<T> {
 public:
  explicit Musicnn(ModelConfig cfg) : Model<T>(std::move(cfg)) {}

 protected:
  nn::Tensor<T> forward_impl(const nn::Tensor<T>& x, const ForwardOptions& opt) override {
    const auto& m = this->cfg_.musicnn;
    const std::size_t B = x.dim(0), T_ = x.dim(3);
    const auto heights = this->cfg_.musicnn_vertical_heights();
    std::vector<nn::Tensor<T>> branches;

    // Timbral branches: tall filters, valid in frequency, same in time, then
    // max over the remaining frequency axis.
    for (std::size_t j = 0; j < heights.size(); ++j) {
      const std::string n = "front.vert" + std::to_string(j + 1);
      nn::Conv2dParams p = nn::Conv2dParams::same(1, m.vertical_width);
      auto h = nn::conv2d(x, this->p(n + ".conv.weight"), nn::Tensor<T>{}, p);
      h = nn::relu(this->batch_norm(h, n + ".bn", opt));
      branches.push_back(nn::reduce_max(h, 2));  // [B, C, T]
    }
    // Temporal branches: wide filters over the frequency-averaged input.
    if (!m.horizontal_widths.empty()) {
      const auto avg = nn::reshape(nn::reduce_mean(x, 2), nn::Shape{B, 1, 1, T_});
      for (std::size_t j = 0; j < m.horizontal_widths.size(); ++j) {
        const std::string n = "front.horiz" + std::to_string(j + 1);
        auto h = nn::conv2d(avg, this->p(n + ".conv.weight"), nn::Tensor<T>{},
                            nn::Conv2dParams::same(1, m.horizontal_widths[j]));
        h = nn::relu(this->batch_norm(h, n + ".bn", opt));
        branches.push_back(nn::reshape(h, nn::Shape{B, h.dim(1), T_}));
      }
    }
    const auto front = nn::concat(branches, 1);  // [B, Cf, T]

    std::vector<nn::Tensor<T>> features{front};
    nn::Tensor<T> h = nn::reshape(front, nn::Shape{B, front.dim(1), 1, T_});
    for (std::size_t k = 0; k < m.midend_layers; ++k) {
      const std::string n = std::to_string(k + 1);
      auto y = nn::conv2d(h, this->p("mid.conv" + n + ".weight"), nn::Tensor<T>{},
                          nn::Conv2dParams::same(1, m.midend_kernel));
      y = nn::relu(this->batch_norm(y, "mid.bn" + n, opt));
      if (k > 0) y = nn::add(y, h);  // residual once widths match
      h = y;
      features.push_back(nn::reshape(h, nn::Shape{B, h.dim(1), T_}));
    }
    const auto all = nn::concat(features, 1);  // [B, C, T]
    auto pooled = nn::concat(std::vector<nn::Tensor<T>>{nn::reduce_max(all, 2), nn::reduce_mean(all, 2)}, 1);

    auto d = nn::dense(pooled, this->p("back.fc1.weight"), this->p("back.fc1.bias"));
    d = nn::relu(this->batch_norm(d, "back.bn", opt));
    d = nn::dropout(d, m.dropout, derive_seed(opt.dropout_seed, 1), opt.training);
    return nn::dense(d, this->p("back.fc2.weight"), this->p("back.fc2.bias"));
  }
};

}  // namespace

template <typename T>
std::unique_ptr<Model<T>> make_musicnn(const ModelConfig& cfg) {
  return std::make_unique<Musicnn<T>>(cfg);
}

template std::unique_ptr<Model<float>> make_musicnn(const ModelConfig&);
template std::unique_ptr<Model<double>> make_musicnn(const ModelConfig&);

}  // namespace ccml::models::detail
