#pragma once

#include <cstdint>
#include <vector>

#include "ccml/nn/tensor.hpp"

namespace ccml::nn {

/// Updates a fixed list of parameters from their accumulated gradients.
/// Parameters with requires_grad == false are skipped; a trainable parameter
/// without a gradient raises OptimizerError.
template <typename T>
class Optimizer {
 public:
  Optimizer(std::vector<Tensor<T>> params, double learning_rate);
  virtual ~Optimizer() = default;

  void step();
  void zero_grad();

  double learning_rate() const noexcept { return lr_; }
  void set_learning_rate(double lr);
  std::uint64_t step_count() const noexcept { return steps_; }
  const std::vector<Tensor<T>>& params() const noexcept { return params_; }

 protected:
  virtual void update(std::size_t index, Tensor<T>& param) = 0;

  std::vector<Tensor<T>> params_;
  double lr_;
  std::uint64_t steps_ = 0;
};

/// Bias-corrected Adam.
template <typename T>
class Adam final : public Optimizer<T> {
 public:
  Adam(std::vector<Tensor<T>> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

 private:
  void update(std::size_t index, Tensor<T>& param) override;

  double beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
};

/// SGD with classical momentum: v = mu * v + g; p -= lr * v.
template <typename T>
class Sgd final : public Optimizer<T> {
 public:
  Sgd(std::vector<Tensor<T>> params, double learning_rate, double momentum = 0.0);

 private:
  void update(std::size_t index, Tensor<T>& param) override;

  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace ccml::nn
