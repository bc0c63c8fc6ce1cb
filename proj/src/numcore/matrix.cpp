#include "flowbind/numcore/matrix.hpp"

#include <algorithm>

namespace flowbind {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(values.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows) throw ShapeError("select_rows: index out of range");
    std::copy_n(values.data() + indices[r] * cols, cols,
                out.values.data() + r * cols);
  }
  return out;
}

Tensor Matrix::to_tensor(bool requires_grad) const {
  return Tensor(Shape{rows, cols}, values, requires_grad);
}

Matrix Matrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError("Matrix::from_tensor expects rank 2, got " +
                     shape_to_string(t.shape()));
  }
  return Matrix(t.rows(), t.cols(),
                std::vector<double>(t.data().begin(), t.data().end()));
}

}  // namespace flowbind
