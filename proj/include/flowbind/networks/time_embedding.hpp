#pragma once

#include <cstddef>
#include <span>

#include "flowbind/numcore/tensor.hpp"

namespace flowbind {

/// Sinusoidal embedding [sin(s t f_k), cos(s t f_k)] with geometric
/// frequencies f_k = 10000^(-k / (dim/2)) and input scale s.
class TimeEmbedding {
 public:
  static constexpr double kBase = 10000.0;
  static constexpr double kInputScale = 10.0;

  explicit TimeEmbedding(std::size_t dim);

  std::size_t dim() const { return dim_; }
  /// [B x dim], no gradient.
  Tensor embed(std::span<const double> t) const;

 private:
  std::size_t dim_;
};

}  // namespace flowbind
