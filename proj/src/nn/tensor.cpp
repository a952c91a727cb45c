#include "ccml/nn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ccml/error.hpp"

namespace ccml::nn {

std::size_t Shape::numel() const noexcept {
  std::size_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::size_t Shape::span_numel(std::size_t begin, std::size_t end) const {
  std::size_t n = 1;
  for (std::size_t i = begin; i < end; ++i) n *= dims_.at(i);
  return n;
}

std::string Shape::str() const {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) ss << (i ? "," : "") << dims_[i];
  ss << ']';
  return ss.str();
}

namespace {
thread_local bool t_grad_mode = true;
bool g_check_finite = false;
}  // namespace

bool grad_mode_enabled() noexcept { return t_grad_mode; }
NoGradGuard::NoGradGuard() : previous_(t_grad_mode) { t_grad_mode = false; }
NoGradGuard::~NoGradGuard() { t_grad_mode = previous_; }

void set_check_finite(bool on) noexcept { g_check_finite = on; }
bool check_finite_enabled() noexcept { return g_check_finite; }

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = shape;
  node->data.assign(shape.numel(), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from_data(const Shape& shape, std::vector<T> data, bool requires_grad) {
  if (data.size() != shape.numel()) {
    throw ShapeError("from_data: shape " + shape.str() + " needs " + std::to_string(shape.numel()) +
                     " values, got " + std::to_string(data.size()));
  }
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = shape;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data(Shape{1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape().str() + " is not a scalar");
  return node_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from_data(shape(), node_->data, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_ || !node_->requires_grad) {
    throw NoGraph("backward called on a tensor that is not part of a recorded graph");
  }
  if (node_->data.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + node_->shape.str());
  }

  // Post-order DFS gives a topological order (inputs before consumers).
  // `order` owns the nodes: releasing a consumer's inputs below must not
  // free a node that is still waiting for its turn.
  std::vector<std::shared_ptr<TensorNode<T>>> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<std::shared_ptr<TensorNode<T>>, std::size_t>> stack{{node_, 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->inputs.size()) {
      std::shared_ptr<TensorNode<T>> child = top.first->inputs[top.second++];
      if (child && child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    order.push_back(std::move(top.first));
    stack.pop_back();
  }

  node_->ensure_grad()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = it->get();
    if (!n->backward_fn) continue;
    if (!n->grad.empty()) n->backward_fn(*n);
    // Each recorded node is visited once; release its closure and inputs.
    n->backward_fn = nullptr;
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

namespace detail {
namespace {

template <typename T>
void check_finite(std::string_view op, const std::vector<T>& data) {
  for (const T& v : data) {
    if (!std::isfinite(v)) throw NumericFault("non-finite value produced by " + std::string(op));
  }
}

template <typename T, typename Range>
Tensor<T> finish(Shape shape, std::vector<T> data, std::string_view op, const Range& inputs,
                 std::function<void(TensorNode<T>&)> backward) {
  if (g_check_finite) check_finite(op, data);
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool track = false;
  if (t_grad_mode) {
    for (const Tensor<T>* in : inputs) {
      if (in && in->defined() && in->requires_grad()) track = true;
    }
  }
  if (track) {
    node->requires_grad = true;
    for (const Tensor<T>* in : inputs) {
      // Undefined optional inputs keep their slot so indices stay stable.
      node->inputs.push_back(in && in->defined() ? in->node() : nullptr);
    }
    node->backward_fn = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

}  // namespace

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(TensorNode<T>&)> backward) {
  return finish<T>(std::move(shape), std::move(data), op, inputs, std::move(backward));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string_view op,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(TensorNode<T>&)> backward) {
  std::vector<const Tensor<T>*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  return finish<T>(std::move(shape), std::move(data), op, ptrs, std::move(backward));
}

template Tensor<float> make_result(Shape, std::vector<float>, std::string_view,
                                   std::initializer_list<const Tensor<float>*>,
                                   std::function<void(TensorNode<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::string_view,
                                    std::initializer_list<const Tensor<double>*>,
                                    std::function<void(TensorNode<double>&)>);
template Tensor<float> make_result(Shape, std::vector<float>, std::string_view,
                                   const std::vector<Tensor<float>>&,
                                   std::function<void(TensorNode<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::string_view,
                                    const std::vector<Tensor<double>>&,
                                    std::function<void(TensorNode<double>&)>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;

}  // namespace ccml::nn
