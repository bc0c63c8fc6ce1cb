#include "flowbind/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace flowbind {

namespace {

thread_local bool g_grad_enabled = true;

void require_finite(std::span<const double> values, const char* where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << where << ": non-finite value " << values[i] << " at index " << i;
      throw NumericError(msg.str());
    }
  }
}

// Post-order DFS over producing nodes; returns tensors with inputs first.
std::vector<std::shared_ptr<detail::TensorImpl>> topological_order(
    const std::shared_ptr<detail::TensorImpl>& root) {
  std::vector<std::shared_ptr<detail::TensorImpl>> order;
  std::unordered_set<const detail::TensorImpl*> visited;
  struct Frame {
    std::shared_ptr<detail::TensorImpl> impl;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = top.impl->node;
    if (node && top.next_input < node->inputs.size()) {
      auto child = node->inputs[top.next_input++];
      if (child->requires_grad && visited.insert(child.get()).second) {
        stack.push_back({child, 0});
      }
      continue;
    }
    order.push_back(top.impl);
    stack.pop_back();
  }
  return order;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (data.size() != shape_numel(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  require_finite(data, "tensor construction");
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
  if (requires_grad) impl_->grad.assign(impl_->data.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::from_impl(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  return impl_->shape.empty() ? 1 : impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (impl_->shape.empty()) return 1;
  std::size_t n = 1;
  for (std::size_t i = 1; i < impl_->shape.size(); ++i) n *= impl_->shape[i];
  return n;
}

std::span<const double> Tensor::data() const { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return impl_->data[row * cols() + col];
}

std::span<double> Tensor::mutable_data() {
  if (impl_->node) throw GraphError("mutable_data() on a non-leaf tensor");
  return impl_->data;
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

std::span<const double> Tensor::grad() const {
  if (!impl_->requires_grad) {
    throw GraphError("grad() on a tensor that does not require grad");
  }
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!impl_->requires_grad) {
    throw GraphError("mutable_grad() on a tensor that does not require grad");
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->requires_grad) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  }
}

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(impl_->shape, impl_->data, requires_grad);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  const auto& root = loss.impl();
  if (root->data.size() != 1) {
    throw GraphError("backward() needs a scalar loss, got shape " +
                     shape_to_string(root->shape));
  }
  if (!root->requires_grad) return;  // constant loss: nothing to propagate
  if (!root->node) {
    root->grad[0] += 1.0;
    return;
  }

  auto order = topological_order(root);
  for (const auto& impl : order) {
    if (impl->node && impl->node->consumed) {
      throw GraphError(std::string("graph already consumed (op '") +
                       impl->node->op + "')");
    }
  }

  root->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& impl = *it;
    if (!impl->node) continue;  // leaf: gradient already accumulated
    auto& node = *impl->node;
    if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
    node.backward(impl->grad);
    node.consumed = true;
    node.backward = nullptr;
    node.inputs.clear();
    impl->grad.clear();
    impl->grad.shrink_to_fit();
  }
}

ValueGraph::ValueGraph(const Tensor& root) {
  if (root.requires_grad()) order_ = topological_order(root.impl());
}

std::vector<std::string> ValueGraph::op_names() const {
  std::vector<std::string> names;
  for (const auto& impl : order_) {
    names.emplace_back(impl->node ? impl->node->op : "leaf");
  }
  return names;
}

bool ValueGraph::consumed() const {
  return std::any_of(order_.begin(), order_.end(), [](const auto& impl) {
    return impl->node && impl->node->consumed;
  });
}

}  // namespace flowbind
