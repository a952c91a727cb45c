#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccml::nn {

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t numel() const noexcept;
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  /// Product of dims in [begin, end).
  std::size_t span_numel(std::size_t begin, std::size_t end) const;

  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backward_fn;  // consumes `grad`, feeds inputs

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T{0});
    return grad;
  }
};

/// Dense row-major array participating in reverse-mode differentiation.
/// Copies share the underlying node (reference semantics, like a handle);
/// use `clone()` for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool is_leaf() const { return !node_->backward_fn; }
  std::string_view op() const { return node_->op; }

  /// Value of a one-element tensor.
  T item() const;

  /// Reverse-mode sweep from this scalar. Throws NoGraph if the tensor does
  /// not require gradients and ShapeError if it is not a scalar. Recorded
  /// intermediate nodes are released afterwards; leaf gradients accumulate.
  void backward() const;

  /// Drops the accumulated gradient (it reappears on the next backward).
  void zero_grad() { node_->grad.clear(); }

  /// Leaf copy of the values, outside any graph.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const TensorNode<T>* id() const noexcept { return node_.get(); }
  const std::shared_ptr<TensorNode<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Recording is on by default; NoGradGuard disables it for its scope
/// (thread-local).
bool grad_mode_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Debug mode: every op output is scanned and a non-finite value raises
/// NumericFault naming the op. Off by default.
void set_check_finite(bool on) noexcept;
bool check_finite_enabled() noexcept;

namespace detail {

/// Builds an op result, attaching `backward` when recording is on and any
/// input requires gradients.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(TensorNode<T>&)> backward);

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(TensorNode<T>&)> backward);

}  // namespace detail

}  // namespace ccml::nn
