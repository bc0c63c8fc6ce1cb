#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "flowbind/numcore/ops.hpp"
#include "flowbind/numcore/rng.hpp"

namespace flowbind {

/// A parameter tensor with its fully qualified name.
struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

/// Prefixes every name in `params` with `prefix` and appends them to `out`.
void append_parameters(ParameterList& out, const std::string& prefix,
                       const ParameterList& params);

/// y = x W + b with W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  /// W, b ~ U(-1/sqrt(in), 1/sqrt(in)).
  static Linear uniform(std::size_t in, std::size_t out, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }

  Tensor operator()(const Tensor& x) const;
  ParameterList parameters() const;
  Linear clone() const;
};

}  // namespace flowbind
