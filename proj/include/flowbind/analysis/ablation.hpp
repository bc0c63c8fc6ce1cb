#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowbind/analysis/alignment.hpp"
#include "flowbind/trainer/trainer.hpp"

namespace flowbind {

/// Fixed-anchor arm: z* is modality `anchor`'s own standardized latent and
/// training sees only subsets containing it. Learnable arm: the usual
/// encoder. Both arms drop `excluded` subsets and are scored on the held-out
/// pair (source -> target).
struct AblationSpec {
  std::size_t anchor = 0;
  std::vector<ModalitySubset> excluded;
  std::size_t source = 1;
  std::size_t target = 2;

  friend bool operator==(const AblationSpec&, const AblationSpec&) = default;
};

struct ArmMetrics {
  double explained_variance = 0.0;  // target latent given the source's shared estimate
  double cknna = 0.0;               // shared images of source vs target
  double rmse = 0.0;                // standardized source -> target translation error
};

struct AblationResult {
  ArmMetrics learnable;
  ArmMetrics fixed;
};

/// Held-out pair metrics for a trained model on a standardized, fully
/// paired eval batch.
ArmMetrics held_out_metrics(const FlowBindModel& model, const ModalityBatch& standardized,
                            std::size_t source, std::size_t target, const SolverSpec& solver,
                            const EvalSettings& settings, std::uint64_t seed);

/// Trains both arms from the same seed and budget and scores them on one
/// shared eval set. Rejects an anchor wider than the latent dim.
AblationResult run_ablation(const AblationSpec& spec, const WorldSpec& world,
                            const PairingSpec& pairing, const ModelConfig& model_config,
                            const TrainConfig& train_config, const SolverSpec& solver,
                            const EvalSettings& settings);

}  // namespace flowbind
