#include "flowbind/analysis/ablation.hpp"

#include <cmath>

namespace flowbind {

ArmMetrics held_out_metrics(const FlowBindModel& model, const ModalityBatch& standardized,
                            std::size_t source, std::size_t target, const SolverSpec& solver,
                            const EvalSettings& settings, std::uint64_t seed) {
  const Tensor source_shared =
      encode_to_shared(padded_latents(model, standardized, source), model.drift(source), solver);
  const Tensor target_shared =
      encode_to_shared(padded_latents(model, standardized, target), model.drift(target), solver);
  const Matrix source_m = Matrix::from_tensor(source_shared);
  const Matrix& truth = standardized.latents[target];

  ArmMetrics m;
  m.explained_variance = explained_variance_fraction(source_m, truth, settings.knn);
  m.cknna = cknna(source_m, Matrix::from_tensor(target_shared), settings.cknna_k, seed,
                  settings.cknna_max);
  const Matrix decoded =
      model.extract(target, decode_from_shared(source_shared, model.drift(target), solver));
  double sq = 0.0;
  for (std::size_t j = 0; j < truth.values.size(); ++j) {
    const double d = decoded.values[j] - truth.values[j];
    sq += d * d;
  }
  m.rmse = std::sqrt(sq / static_cast<double>(truth.values.size()));
  return m;
}

AblationResult run_ablation(const AblationSpec& spec, const WorldSpec& world,
                            const PairingSpec& pairing, const ModelConfig& model_config,
                            const TrainConfig& train_config, const SolverSpec& solver,
                            const EvalSettings& settings) {
  if (spec.anchor >= world.modality_count() || spec.source >= world.modality_count() ||
      spec.target >= world.modality_count() || spec.source == spec.target) {
    throw ArgumentError("ablation: invalid anchor or held-out pair");
  }
  if (world.views[spec.anchor].dim() > model_config.latent_dim) {
    throw ArgumentError("ablation: anchor modality '" + world.views[spec.anchor].name +
                        "' has dim " + std::to_string(world.views[spec.anchor].dim()) +
                        ", wider than latent dim " + std::to_string(model_config.latent_dim));
  }
  const PairingSpec kept = pairing.without(spec.excluded);
  const std::uint64_t seed = train_config.seed;
  Rng stats_rng = Rng(seed).split(streams::kStats);
  const auto stats = compute_norm_stats(world, train_config.stats_samples, stats_rng);
  Rng eval_rng = Rng(seed).split(streams::kEval);
  const ModalityBatch eval = standardize(sample_paired(world, settings.samples, eval_rng), stats);

  const auto run_arm = [&](AnchorMode mode) {
    TrainConfig cfg = train_config;
    cfg.anchor = mode;
    cfg.anchor_modality = spec.anchor;
    FlowBindModel model = make_model(world, model_config, seed);
    run_training(model, world, kept, stats, cfg);
    return held_out_metrics(model, eval, spec.source, spec.target, solver, settings, seed);
  };
  AblationResult result;
  result.learnable = run_arm(AnchorMode::learnable);
  result.fixed = run_arm(AnchorMode::fixed);
  return result;
}

}  // namespace flowbind
