#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "flowbind/networks/model.hpp"
#include "flowbind/synthdata/discrete.hpp"

namespace flowbind {

/// v_i(z*, 0) for modality i, same width as z*.
using T0Drift =
    std::function<std::vector<double>(std::size_t modality, std::span<const double> z_star)>;

struct DecompositionTerm {
  double total = 0.0;        // E||v_i(z*,0) - (z^i - z*)||^2
  double unexplained = 0.0;  // E[Var(z^i | z*)]
  double approx = 0.0;       // E||v_i(z*,0) - E[z^i - z* | z*]||^2
};

struct DecompositionReport {
  double total = 0.0;
  double unexplained = 0.0;
  double approx = 0.0;
  std::vector<DecompositionTerm> per_modality;

  double gap() const { return total - (unexplained + approx); }
};

inline constexpr double kDecompositionTolerance = 1e-9;

/// Exact t = 0 loss split over a discrete joint whose modality values share
/// the width of z*. Throws NumericError if total != unexplained + approx
/// beyond tolerance * (1 + |total|).
DecompositionReport t0_decomposition(const DiscreteJoint& joint, const T0Drift& drift,
                                     double tolerance = kDecompositionTolerance);

/// The Bayes-optimal drift E[z^i | z*] - z*, looked up by exact z* value.
T0Drift conditional_mean_drift(const DiscreteJoint& joint);

/// Replaces each outcome's z* with encoder head `source` applied to the
/// outcome's original shared value (which must have that head's input width).
DiscreteJoint bind_shared_latents(const DiscreteJoint& joint, const FlowBindModel& model,
                                  std::size_t source);

/// Decomposition for the model's own drifts at t = 0. Modality values of
/// width d_i are zero padded to the latent width, matching training.
DecompositionReport t0_decomposition_report(const FlowBindModel& model,
                                            const DiscreteJoint& joint,
                                            double tolerance = kDecompositionTolerance);

}  // namespace flowbind
