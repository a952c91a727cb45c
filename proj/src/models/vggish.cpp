#include "arch.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::models::detail {

std::vector<ParamSpec> describe_vggish(const ModelConfig& cfg) {
  std::vector<ParamSpec> specs;
  const auto ch = cfg.vgg_channels();
  std::size_t in = 1;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    const std::string n = std::to_string(i + 1);
    // Bias is omitted: the following batch norm absorbs it.
    add_conv(specs, "conv" + n, ch[i], in, 3, 3, false);
    add_batch_norm(specs, "bn" + n, ch[i]);
    in = ch[i];
  }
  const std::size_t dense = cfg.scaled(cfg.vggish.dense_dim);
  add_dense(specs, "fc1", dense, in);
  add_batch_norm(specs, "bn_fc1", dense);
  add_dense(specs, "fc2", cfg.n_tags, dense);
  return specs;
}

namespace {

template <typename T>
class VggIsh final : public Model<T> {
 public:
  explicit VggIsh(ModelConfig cfg) : Model<T>(std::move(cfg)), pools_(this->cfg_.vgg_pool_schedule()) {}

 protected:
  nn::Tensor<T> forward_impl(const nn::Tensor<T>& x, const ForwardOptions& opt) override {
    nn::Tensor<T> h = x;
    for (std::size_t i = 0; i < pools_.size(); ++i) {
      const std::string n = std::to_string(i + 1);
      h = nn::conv2d(h, this->p("conv" + n + ".weight"), nn::Tensor<T>{}, nn::Conv2dParams::uniform(1));
      h = nn::relu(this->batch_norm(h, "bn" + n, opt));
      h = nn::max_pool2d(h, pools_[i].first, pools_[i].second);
    }
    h = nn::global_pool(h, nn::PoolKind::Max);
    h = nn::dense(h, this->p("fc1.weight"), this->p("fc1.bias"));
    h = nn::relu(this->batch_norm(h, "bn_fc1", opt));
    h = nn::dropout(h, this->cfg_.vggish.dropout, derive_seed(opt.dropout_seed, 1), opt.training);
    return nn::dense(h, this->p("fc2.weight"), this->p("fc2.bias"));
  }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> pools_;
};

}  // namespace

template <typename T>
std::unique_ptr<Model<T>> make_vggish(const ModelConfig& cfg) {
  return std::make_unique<VggIsh<T>>(cfg);
}

template std::unique_ptr<Model<float>> make_vggish(const ModelConfig&);
template std::unique_ptr<Model<double>> make_vggish(const ModelConfig&);

}  // namespace ccml::models::detail
