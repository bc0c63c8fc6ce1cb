#pragma once

#include <cstddef>
#include <vector>

#include "flowbind/flowrt/ode.hpp"
#include "flowbind/networks/model.hpp"
#include "flowbind/synthdata/normalization.hpp"

namespace flowbind {

/// Raw (unstandardized) latents of one source modality.
struct SourceLatents {
  std::size_t modality = 0;
  Matrix values;
};

struct TranslationRequest {
  std::vector<SourceLatents> sources;
  std::size_t target = 0;
  SolverSpec solver;
};

/// Backward flow t: 1 -> 0 of standardized, padded modality latents.
Tensor encode_to_shared(const Tensor& z_i, const DriftNetwork& net, const SolverSpec& spec);

/// Forward flow t: 0 -> 1 from the shared latent.
Tensor decode_from_shared(const Tensor& z_star, const DriftNetwork& net,
                          const SolverSpec& spec);

/// Elementwise mean; k identical estimates return that estimate exactly.
Tensor aggregate_latents(const std::vector<Tensor>& estimates);

/// Standardize, encode every source, and average in modality order.
Tensor shared_from_sources(const TranslationRequest& request, const FlowBindModel& model,
                           const std::vector<NormStats>& stats);

/// Decodes a shared latent into de-standardized target-modality values.
Matrix decode_target(const Tensor& z_star, std::size_t target, const FlowBindModel& model,
                     const std::vector<NormStats>& stats, const SolverSpec& spec);

/// Full any-to-any pipeline; the result is de-standardized.
Matrix translate(const TranslationRequest& request, const FlowBindModel& model,
                 const std::vector<NormStats>& stats);

/// Decodes (1 - l) zA + l zB for l = k / (steps - 1), k = 0..steps-1.
std::vector<Matrix> latent_interpolate(const Tensor& z_a, const Tensor& z_b,
                                       std::size_t steps, std::size_t target,
                                       const FlowBindModel& model,
                                       const std::vector<NormStats>& stats,
                                       const SolverSpec& spec);

}  // namespace flowbind
