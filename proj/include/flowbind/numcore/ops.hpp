#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "flowbind/numcore/tensor.hpp"

namespace flowbind {

enum class ElementwiseOp { add, sub, mul, tanh, silu };

/// Binary ops broadcast over trailing dimensions only: the smaller operand's
/// shape must be a suffix of the larger one's. Unary ops ignore `b`.
Tensor elementwise(ElementwiseOp op, const Tensor& a,
                   const std::optional<Tensor>& b = std::nullopt);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor tanh(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor scale(const Tensor& x, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_squares(const Tensor& x);

/// Normalizes each row of a [rows x width] tensor to zero mean, unit
/// variance (biased). No affine parameters.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

/// y[b, :] = factors[b] * x[b, :]. Both operands are differentiable.
Tensor scale_rows(const Tensor& x, const Tensor& factors);

/// Gathers rows of a [n x width] tensor.
Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Places row r of x at output row rows[r] of a zero [out_rows x width]
/// tensor, summing collisions.
Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> rows,
                    std::size_t out_rows);

/// Row-wise select: take[b] ? a[b, :] : b[b, :].
Tensor where_rows(std::span<const bool> take_first, const Tensor& a,
                  const Tensor& b);

/// Same values, no graph linkage; gradients stop here.
Tensor detach(const Tensor& x);

}  // namespace flowbind
