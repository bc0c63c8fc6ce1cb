#include "flowbind/flowrt/ode.hpp"

#include <cmath>

namespace flowbind {

std::string to_string(SolverMethod method) {
  return method == SolverMethod::euler ? "euler" : "heun";
}

SolverMethod parse_solver_method(const std::string& text) {
  if (text == "euler") return SolverMethod::euler;
  if (text == "heun") return SolverMethod::heun;
  throw ArgumentError("unknown solver method '" + text + "' (expected euler or heun)");
}

void SolverSpec::validate() const {
  if (steps == 0) throw ArgumentError("solver steps must be >= 1");
}

namespace {

double grid_time(double t0, double t1, std::size_t k, std::size_t n) {
  if (k == n) return t1;
  return t0 + (t1 - t0) * (static_cast<double>(k) / static_cast<double>(n));
}

Tensor axpy(const Tensor& z, double h, const Tensor& v) {
  if (v.shape() != z.shape()) {
    throw ShapeError("ode_solve: field returned " + shape_to_string(v.shape()) +
                     " for state " + shape_to_string(z.shape()));
  }
  std::vector<double> out(z.data().begin(), z.data().end());
  const auto vd = v.data();
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += h * vd[j];
  return Tensor::matrix(z.rows(), z.cols(), std::move(out));
}

Tensor heun_combine(const Tensor& z, double h, const Tensor& v0, const Tensor& v1) {
  std::vector<double> out(z.data().begin(), z.data().end());
  const auto a = v0.data();
  const auto b = v1.data();
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += 0.5 * h * (a[j] + b[j]);
  return Tensor::matrix(z.rows(), z.cols(), std::move(out));
}

}  // namespace

Tensor ode_solve(const Tensor& z0, const VelocityField& field, double t0, double t1,
                 const SolverSpec& spec) {
  spec.validate();
  if (!(t0 >= 0.0 && t0 <= 1.0 && t1 >= 0.0 && t1 <= 1.0)) {
    throw ArgumentError("ode_solve: times must lie in [0, 1]");
  }
  if (z0.rank() != 2) throw ShapeError("ode_solve: state must be [B x d]");
  for (double v : z0.data()) {
    if (!std::isfinite(v)) throw NumericError("ode_solve: non-finite initial state");
  }
  NoGradGuard guard;
  Tensor z = Tensor::matrix(z0.rows(), z0.cols(), {z0.data().begin(), z0.data().end()});
  if (t0 == t1) return z;
  const std::size_t n = spec.steps;
  for (std::size_t k = 0; k < n; ++k) {
    const double ta = grid_time(t0, t1, k, n);
    const double tb = grid_time(t0, t1, k + 1, n);
    const double h = tb - ta;
    try {
      const Tensor v0 = field(z, ta);
      if (spec.method == SolverMethod::euler) {
        z = axpy(z, h, v0);
      } else {
        const Tensor predictor = axpy(z, h, v0);
        z = heun_combine(z, h, v0, field(predictor, tb));
      }
    } catch (const NumericError& e) {
      throw NumericError("ode_solve: non-finite state at step " + std::to_string(k) +
                         " of " + std::to_string(n) + ": " + e.what());
    }
  }
  return z;
}

Tensor ode_solve(const Tensor& z0, const DriftNetwork& net, double t0, double t1,
                 const SolverSpec& spec) {
  return ode_solve(
      z0, [&net](const Tensor& z, double t) { return net(z, t); }, t0, t1, spec);
}

}  // namespace flowbind
