#pragma once

#include <cmath>
#include <cstddef>

#include "ccml/nn/tensor.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::nn::init {

template <typename T>
void uniform(Tensor<T>& t, double bound, Rng& rng) {
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
void he_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

/// U(-a, a) with a = sqrt(6/(fan_in + fan_out)).
template <typename T>
void xavier_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

template <typename T>
void normal(Tensor<T>& t, double mean, double stddev, Rng& rng) {
  for (T& v : t.data()) v = static_cast<T>(rng.normal(mean, stddev));
}

template <typename T>
void constant(Tensor<T>& t, T value) {
  for (T& v : t.data()) v = value;
}

}  // namespace ccml::nn::init
