#include "flowbind/trainer/adam.hpp"

#include <cmath>

namespace flowbind {

void AdamConfig::validate() const {
  if (!(lr >= 0.0)) throw ArgumentError("adam: learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("adam: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ArgumentError("adam: eps must be positive");
  if (!std::isfinite(clip_norm)) throw ArgumentError("adam: clip norm must be finite");
}

Adam::Adam(ParameterList params, const AdamConfig& config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  for (const auto& p : params_) {
    if (!p.tensor.requires_grad()) {
      throw ArgumentError("adam: parameter '" + p.name + "' does not track gradients");
    }
    state_.m.emplace_back(p.tensor.numel(), 0.0);
    state_.v.emplace_back(p.tensor.numel(), 0.0);
  }
}

double global_grad_norm(const ParameterList& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double Adam::step() {
  const double norm = global_grad_norm(params_);
  if (!std::isfinite(norm)) throw NumericError("adam: non-finite gradient norm");
  const double clip =
      config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto values = params_[k].tensor.mutable_data();
    const auto grad = params_[k].tensor.grad();
    auto& m = state_.m[k];
    auto& v = state_.v[k];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j] * clip;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace flowbind
