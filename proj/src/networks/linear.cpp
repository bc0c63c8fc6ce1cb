#include "flowbind/networks/linear.hpp"

#include <cmath>

namespace flowbind {

void append_parameters(ParameterList& out, const std::string& prefix,
                       const ParameterList& params) {
  for (const auto& p : params) out.push_back({prefix + "." + p.name, p.tensor});
}

Linear Linear::uniform(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out), b(out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  for (double& v : b) v = rng.uniform(-bound, bound);
  return {Tensor::matrix(in, out, std::move(w), true),
          Tensor::vector(std::move(b), true)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_features()) {
    throw ShapeError("linear layer expects [B x " + std::to_string(in_features()) +
                     "], got " + shape_to_string(x.shape()));
  }
  return add(matmul(x, weight), bias);
}

ParameterList Linear::parameters() const {
  return {{"weight", weight}, {"bias", bias}};
}

Linear Linear::clone() const { return {weight.clone(), bias.clone()}; }

}  // namespace flowbind
