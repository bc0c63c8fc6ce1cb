#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowbind/numcore/errors.hpp"

namespace flowbind {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;

namespace detail {

struct TensorImpl;

/// One recorded operation: the inputs it read and the rule that pushes the
/// output gradient back into them.
struct GraphNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const double> grad_out)> backward;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::shared_ptr<GraphNode> node;
};

}  // namespace detail

/// Dense row-major float64 array with optional reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// parameter tensors need (the optimizer updates them in place). Use clone()
/// for an independent copy. Values are checked to be finite on construction
/// and at every op boundary.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Extent of dimension 0 (1 for scalars).
  std::size_t rows() const;
  /// Product of all extents after dimension 0.
  std::size_t cols() const;

  std::span<const double> data() const;
  double item() const;
  double at(std::size_t flat) const { return data()[flat]; }
  double at(std::size_t row, std::size_t col) const;

  /// In-place access for leaf tensors (parameter updates). Throws on
  /// tensors produced by an op.
  std::span<double> mutable_data();

  bool requires_grad() const;
  bool is_leaf() const;
  /// Accumulated gradient; zeros until a backward pass reaches this leaf.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  Tensor clone(bool requires_grad) const;
  Tensor clone() const { return clone(requires_grad()); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Disables graph recording for the lifetime of the guard (per thread).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Reverse pass from a scalar loss. Every tracked leaf reachable from the
/// loss receives d(loss)/d(leaf) added to its grad. The traversed graph is
/// consumed; a second backward through any of its nodes throws GraphError.
void backward(const Tensor& loss);

/// The topologically ordered record of operations behind a tensor.
class ValueGraph {
 public:
  explicit ValueGraph(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  /// Operation names in topological order (inputs before outputs).
  std::vector<std::string> op_names() const;
  bool consumed() const;

 private:
  std::vector<std::shared_ptr<detail::TensorImpl>> order_;
};

}  // namespace flowbind
