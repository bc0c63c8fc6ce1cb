#pragma once

#include <cstddef>
#include <vector>

#include "flowbind/networks/model.hpp"
#include "flowbind/synthdata/batch.hpp"

namespace flowbind {

/// z_t = t z_i + (1 - t) z_star per row.
Tensor interpolate(const Tensor& z_star, const Tensor& z_i, const Tensor& t);

/// The two occurrences of z* in the objective, after the gradient rule.
struct PolicyLatents {
  Tensor interp;  // enters the drift input z_t
  Tensor target;  // enters the regression target z_i - z*
};

/// Rows with t > 0 see detach(z*); rows with t = 0 keep the live z*. With
/// detach_target false only the interpolant is detached for t > 0.
PolicyLatents apply_gradient_policy(const Tensor& t, const Tensor& z_star,
                                    bool detach_target = true);

struct FmLoss {
  Tensor loss;                          // mean over (row, present modality)
  std::size_t terms = 0;                // M
  std::vector<double> residual_sq;      // per-modality summed squared residual
  std::vector<std::size_t> counts;      // per-modality present rows
};

/// Flow-matching loss over present modalities. `batch` must already be
/// standardized; modality latents are zero padded to the model width.
FmLoss fm_loss_terms(const FlowBindModel& model, const ModalityBatch& batch,
                     const PolicyLatents& z_star, const Tensor& t);

Tensor fm_loss(const FlowBindModel& model, const ModalityBatch& batch,
               const Tensor& z_star, const Tensor& t);

}  // namespace flowbind
