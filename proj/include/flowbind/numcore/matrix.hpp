#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowbind/numcore/tensor.hpp"

namespace flowbind {

/// Plain row-major data block. Unlike Tensor it may hold NaN (used to poison
/// absent modality entries) and carries no gradient machinery.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  Matrix select_rows(std::span<const std::size_t> indices) const;
  Tensor to_tensor(bool requires_grad = false) const;
  static Matrix from_tensor(const Tensor& t);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace flowbind
