#include "flowbind/networks/time_embedding.hpp"

#include <cmath>
#include <vector>

namespace flowbind {

TimeEmbedding::TimeEmbedding(std::size_t dim) : dim_(dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ArgumentError("time embedding dim must be even and positive, got " +
                        std::to_string(dim));
  }
}

Tensor TimeEmbedding::embed(std::span<const double> t) const {
  const std::size_t half = dim_ / 2;
  std::vector<double> out(t.size() * dim_);
  for (std::size_t b = 0; b < t.size(); ++b) {
    for (std::size_t k = 0; k < half; ++k) {
      const double freq =
          std::pow(kBase, -static_cast<double>(k) / static_cast<double>(half));
      const double arg = kInputScale * t[b] * freq;
      out[b * dim_ + k] = std::sin(arg);
      out[b * dim_ + half + k] = std::cos(arg);
    }
  }
  return Tensor::matrix(t.size(), dim_, std::move(out));
}

}  // namespace flowbind
