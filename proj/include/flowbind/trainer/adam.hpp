#pragma once

#include <cstdint>
#include <vector>

#include "flowbind/networks/linear.hpp"

namespace flowbind {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping

  void validate() const;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// Adam over a fixed parameter list with global-norm gradient clipping.
class Adam {
 public:
  Adam(ParameterList params, const AdamConfig& config);

  /// Clips, applies one update from the accumulated gradients and returns
  /// the pre-clip global gradient norm. Gradients are left untouched.
  double step();
  void zero_grad();

  const OptimizerState& state() const { return state_; }
  OptimizerState& state() { return state_; }
  const ParameterList& parameters() const { return params_; }
  const AdamConfig& config() const { return config_; }

 private:
  ParameterList params_;
  AdamConfig config_;
  OptimizerState state_;
};

double global_grad_norm(const ParameterList& params);

}  // namespace flowbind
