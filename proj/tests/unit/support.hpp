#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "flowbind/networks/linear.hpp"
#include "flowbind/numcore/rng.hpp"

namespace flowbind::testing {

inline constexpr double kFdStep = 1e-6;
inline constexpr double kFdRelTol = 1e-4;
// Central differences with h = 1e-6 carry about 1e-10 * |f| of rounding
// noise, so gradients this small are compared absolutely.
inline constexpr double kFdAbsFloor = 1e-7;

/// Central difference of f with respect to one entry of a leaf tensor.
inline double central_difference(const std::function<double()>& f, Tensor& leaf,
                                 std::size_t index, double h = kFdStep) {
  auto data = leaf.mutable_data();
  const double saved = data[index];
  data[index] = saved + h;
  const double up = f();
  data[index] = saved - h;
  const double down = f();
  data[index] = saved;
  return (up - down) / (2.0 * h);
}

inline bool grad_close(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  return diff <= kFdRelTol * std::max(std::abs(analytic), std::abs(numeric)) ||
         diff <= kFdAbsFloor;
}

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true,
                            double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Overwrites every parameter with N(0, scale^2) draws.
inline void randomize(const ParameterList& params, Rng& rng, double scale) {
  for (auto p : params) {
    for (double& v : p.tensor.mutable_data()) v = scale * rng.normal();
  }
}

}  // namespace flowbind::testing
