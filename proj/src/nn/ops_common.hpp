#pragma once

#include <string>
#include <type_traits>

#include "ccml/error.hpp"
#include "ccml/nn/ops.hpp"
#include "ccml/simd/kernels.hpp"

namespace ccml::nn::detail {

[[noreturn]] inline void shape_fail(const char* op, const std::string& msg) {
  throw ShapeError(std::string(op) + ": " + msg);
}

inline void require_defined(const char* op, bool defined, const char* what) {
  if (!defined) shape_fail(op, std::string(what) + " is undefined");
}

/// Gradient buffer of input `i`, or nullptr when it does not need one.
template <typename T>
T* input_grad(TensorNode<T>& out, std::size_t i) {
  auto& in = out.inputs[i];
  if (!in || !in->requires_grad) return nullptr;
  return in->ensure_grad().data();
}

template <typename T>
const T* input_data(const TensorNode<T>& out, std::size_t i) {
  return out.inputs[i]->data.data();
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

inline AxisSplit split_axis(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.rank()) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for shape " + s.str());
  }
  return {s.span_numel(0, axis), s[axis], s.span_numel(axis + 1, s.rank())};
}

inline Shape drop_axis(const Shape& s, std::size_t axis) {
  std::vector<std::size_t> d = s.dims();
  d.erase(d.begin() + static_cast<std::ptrdiff_t>(axis));
  if (d.empty()) d.push_back(1);
  return Shape(std::move(d));
}

template <typename T>
void add_into(std::size_t n, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    simd::kernels().add(n, x, y);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
  }
}

}  // namespace ccml::nn::detail

#define CCML_INSTANTIATE_FT(macro) \
  macro(float)                     \
  macro(double)
