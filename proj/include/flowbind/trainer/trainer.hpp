#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flowbind/networks/model.hpp"
#include "flowbind/synthdata/normalization.hpp"
#include "flowbind/trainer/adam.hpp"
#include "flowbind/trainer/objective.hpp"
#include "flowbind/trainer/time_sampler.hpp"

namespace flowbind {

/// Independent random streams derived from one experiment seed.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kTime = 3;
inline constexpr std::uint64_t kStats = 4;
inline constexpr std::uint64_t kEval = 5;
}  // namespace streams

enum class AnchorMode { learnable, fixed };

struct TrainConfig {
  std::size_t steps = 10000;
  std::size_t batch_size = 256;
  AdamConfig adam;
  TimeSampler time;
  bool detach_target = true;
  bool freeze_encoder = false;
  AnchorMode anchor = AnchorMode::learnable;
  std::size_t anchor_modality = 0;  // used when anchor == fixed
  std::size_t stats_samples = 8192;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct StepStats {
  std::size_t step = 0;  // 1-based count after the update
  double loss = 0.0;
  double t0_fraction = 0.0;
  std::vector<double> residual_rms;  // NaN where the modality was absent
  double grad_norm = 0.0;
};

/// Raised when the loss or gradients become non-finite.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::string diagnostics)
      : NumericError(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Per-modality normalization statistics from fully paired world samples.
std::vector<NormStats> compute_norm_stats(const WorldSpec& world, std::size_t samples,
                                          Rng& rng);

/// One optimizer over the model; owns the time/noise stream.
class Trainer {
 public:
  Trainer(FlowBindModel& model, const TrainConfig& config);

  /// Forward, backward and one Adam update on an already standardized batch.
  StepStats train_step(const ModalityBatch& batch);

  std::size_t steps_done() const { return steps_; }
  const Adam& optimizer() const { return adam_; }
  const TrainConfig& config() const { return config_; }

 private:
  PolicyLatents shared_latents(const ModalityBatch& batch, const Tensor& t);
  std::string diagnostics(const ModalityBatch& batch,
                          const std::vector<double>& t) const;

  FlowBindModel& model_;
  TrainConfig config_;
  Adam adam_;
  Rng time_rng_;
  std::size_t steps_ = 0;
};

/// Training pairing actually used: fixed-anchor runs keep only subsets that
/// contain the anchor modality.
PairingSpec effective_pairing(const PairingSpec& pairing, const TrainConfig& config);

struct TrainingHooks {
  std::function<void(const StepStats&)> on_step;
  std::function<void(std::size_t step)> on_checkpoint;
};

/// Runs config.steps updates, drawing fresh standardized batches from the
/// world on the data stream.
std::vector<StepStats> run_training(FlowBindModel& model, const WorldSpec& world,
                                    const PairingSpec& pairing,
                                    const std::vector<NormStats>& stats,
                                    const TrainConfig& config,
                                    const TrainingHooks& hooks = {});

/// Fresh model initialized from the config seed's init stream.
FlowBindModel make_model(const WorldSpec& world, const ModelConfig& config,
                         std::uint64_t seed);

}  // namespace flowbind
