#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "flowbind/networks/drift_network.hpp"

namespace flowbind {

enum class SolverMethod { euler, heun };

std::string to_string(SolverMethod method);
SolverMethod parse_solver_method(const std::string& text);

struct SolverSpec {
  SolverMethod method = SolverMethod::heun;
  std::size_t steps = 100;

  void validate() const;

  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

/// v(z, t) for a batch sharing one time value.
using VelocityField = std::function<Tensor(const Tensor& z, double t)>;

/// Fixed-step integration of dz/dt = v(z, t) from t0 to t1. Heun uses the
/// trapezoidal predictor-corrector. Runs without gradient tracking.
Tensor ode_solve(const Tensor& z0, const VelocityField& field, double t0, double t1,
                 const SolverSpec& spec);
Tensor ode_solve(const Tensor& z0, const DriftNetwork& net, double t0, double t1,
                 const SolverSpec& spec);

}  // namespace flowbind
