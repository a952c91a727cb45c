#include "ccml/nn/optim.hpp"

#include <cmath>

#include "ccml/error.hpp"

namespace ccml::nn {

template <typename T>
Optimizer<T>::Optimizer(std::vector<Tensor<T>> params, double learning_rate) : params_(std::move(params)), lr_(0.0) {
  set_learning_rate(learning_rate);
}

template <typename T>
void Optimizer<T>::set_learning_rate(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw OptimizerError("learning rate must be positive and finite");
  lr_ = lr;
}

template <typename T>
void Optimizer<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (p.requires_grad() && !p.has_grad()) {
      throw OptimizerError("parameter " + std::to_string(i) + " " + p.shape().str() + " has no gradient");
    }
  }
  ++steps_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].requires_grad()) update(i, params_[i]);
  }
}

template <typename T>
void Optimizer<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, double learning_rate, double beta1, double beta2, double eps)
    : Optimizer<T>(std::move(params), learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
    throw OptimizerError("Adam hyper-parameters out of range");
  }
  for (const auto& p : this->params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::update(std::size_t index, Tensor<T>& param) {
  auto& m = m_[index];
  auto& v = v_[index];
  const auto g = param.grad();
  auto w = param.data();
  const double t = static_cast<double>(this->steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i];
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    w[i] = static_cast<T>(w[i] - this->lr_ * mhat / (std::sqrt(vhat) + eps_));
  }
}

template <typename T>
Sgd<T>::Sgd(std::vector<Tensor<T>> params, double learning_rate, double momentum)
    : Optimizer<T>(std::move(params), learning_rate), momentum_(momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw OptimizerError("momentum must be in [0,1)");
  for (const auto& p : this->params_) velocity_.emplace_back(p.numel(), 0.0);
}

template <typename T>
void Sgd<T>::update(std::size_t index, Tensor<T>& param) {
  auto& vel = velocity_[index];
  const auto g = param.grad();
  auto w = param.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    vel[i] = momentum_ * vel[i] + g[i];
    w[i] = static_cast<T>(w[i] - this->lr_ * vel[i]);
  }
}

template class Optimizer<float>;
template class Optimizer<double>;
template class Adam<float>;
template class Adam<double>;
template class Sgd<float>;
template class Sgd<double>;

}  // namespace ccml::nn
