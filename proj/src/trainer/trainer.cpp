#include "flowbind/trainer/trainer.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace flowbind {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ArgumentError("train: batch_size must be positive");
  if (stats_samples < 2) throw ArgumentError("train: stats_samples must be >= 2");
  adam.validate();
  time.validate();
}

std::vector<NormStats> compute_norm_stats(const WorldSpec& world, std::size_t samples,
                                          Rng& rng) {
  return normalization_stats({sample_paired(world, samples, rng)});
}

namespace {

ParameterList trainable_parameters(const FlowBindModel& model, const TrainConfig& config) {
  const bool encoder_trains =
      config.anchor == AnchorMode::learnable && !config.freeze_encoder;
  return encoder_trains ? model.parameters() : model.drift_parameters();
}

}  // namespace

Trainer::Trainer(FlowBindModel& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      adam_(trainable_parameters(model, config), config.adam),
      time_rng_(Rng(config.seed).split(streams::kTime)) {
  config_.validate();
  if (config_.anchor == AnchorMode::fixed) {
    if (config_.anchor_modality >= model.modality_count()) {
      throw ArgumentError("train: anchor modality out of range");
    }
    if (model.modalities()[config_.anchor_modality].dim > model.latent_dim()) {
      throw ArgumentError("train: anchor modality is wider than the latent dim");
    }
  }
}

PolicyLatents Trainer::shared_latents(const ModalityBatch& batch, const Tensor& t) {
  if (config_.anchor == AnchorMode::fixed) {
    const std::size_t k = config_.anchor_modality;
    for (std::size_t r = 0; r < batch.rows; ++r) {
      if (!batch.is_present(k, r)) {
        throw ArgumentError("train: fixed-anchor batch row " + std::to_string(r) +
                            " lacks the anchor modality");
      }
    }
    const Tensor anchor = model_.embed(k, batch.latents[k]);
    return {anchor, anchor};
  }
  const Tensor z_star = encode_shared(model_.encoder(), batch, time_rng_, true);
  return apply_gradient_policy(t, z_star, config_.detach_target);
}

std::string Trainer::diagnostics(const ModalityBatch& batch,
                                 const std::vector<double>& t) const {
  std::ostringstream out;
  out << "step " << steps_ + 1 << "\n";
  std::size_t zeros = 0, ones = 0;
  std::vector<std::size_t> bins(10, 0);
  for (double v : t) {
    if (v == 0.0) {
      ++zeros;
    } else if (v == 1.0) {
      ++ones;
    } else {
      ++bins[std::min<std::size_t>(9, static_cast<std::size_t>(v * 10.0))];
    }
  }
  out << "t histogram: t=0 " << zeros << ", t=1 " << ones << ", interior";
  for (std::size_t b = 0; b < bins.size(); ++b) out << ' ' << bins[b];
  out << "\n";
  for (std::size_t i = 0; i < model_.modality_count(); ++i) {
    out << "residual norm " << model_.modalities()[i].name << ": ";
    const auto rows = batch.present_rows(i);
    if (rows.empty()) {
      out << "absent\n";
      continue;
    }
    try {
      NoGradGuard guard;
      Rng scratch(0);
      const Tensor z_star = encode_shared(model_.encoder(), batch, scratch, false);
      std::vector<double> t_rows;
      for (std::size_t r : rows) t_rows.push_back(t[r]);
      const Tensor t_i = Tensor::vector(std::move(t_rows));
      const Tensor z_i = model_.embed(i, batch.latents[i].select_rows(rows));
      const Tensor zs = index_rows(z_star, rows);
      const Tensor v = model_.drift(i)(interpolate(zs, z_i, t_i), t_i);
      out << std::sqrt(sum_squares(sub(v, sub(z_i, zs))).item()) << "\n";
    } catch (const Error&) {
      out << "non-finite\n";
    }
  }
  return out.str();
}

StepStats Trainer::train_step(const ModalityBatch& batch) {
  const std::vector<double> times = config_.time.draw(batch.rows, time_rng_);
  const Tensor t = Tensor::vector(times);
  StepStats stats;
  try {
    const PolicyLatents z_star = shared_latents(batch, t);
    FmLoss fm = fm_loss_terms(model_, batch, z_star, t);
    backward(fm.loss);
    stats.loss = fm.loss.item();
    stats.grad_norm = adam_.step();
    for (std::size_t i = 0; i < fm.counts.size(); ++i) {
      stats.residual_rms.push_back(
          fm.counts[i] == 0 ? std::nan("")
                            : std::sqrt(fm.residual_sq[i] / static_cast<double>(fm.counts[i])));
    }
  } catch (const NumericError& e) {
    for (auto& p : model_.parameters()) p.tensor.zero_grad();
    throw TrainingDiverged(std::string("training diverged: ") + e.what(),
                           diagnostics(batch, times));
  }
  // Frozen parameters also accumulate gradients; clear everything.
  for (auto& p : model_.parameters()) p.tensor.zero_grad();
  std::size_t zeros = 0;
  for (double v : times) zeros += v == 0.0 ? 1 : 0;
  stats.t0_fraction = static_cast<double>(zeros) / static_cast<double>(times.size());
  stats.step = ++steps_;
  return stats;
}

PairingSpec effective_pairing(const PairingSpec& pairing, const TrainConfig& config) {
  if (config.anchor == AnchorMode::fixed) {
    return pairing.restricted_to(config.anchor_modality);
  }
  return pairing;
}

std::vector<StepStats> run_training(FlowBindModel& model, const WorldSpec& world,
                                    const PairingSpec& pairing,
                                    const std::vector<NormStats>& stats,
                                    const TrainConfig& config,
                                    const TrainingHooks& hooks) {
  const PairingSpec train_pairing = effective_pairing(pairing, config);
  train_pairing.validate(world.modality_count());
  Trainer trainer(model, config);
  Rng data_rng = Rng(config.seed).split(streams::kData);
  std::vector<StepStats> log;
  log.reserve(config.steps);
  for (std::size_t s = 0; s < config.steps; ++s) {
    const ModalityBatch batch =
        standardize(sample_batch(world, train_pairing, config.batch_size, data_rng), stats);
    log.push_back(trainer.train_step(batch));
    if (hooks.on_step) hooks.on_step(log.back());
    if (hooks.on_checkpoint && config.checkpoint_every > 0 &&
        log.back().step % config.checkpoint_every == 0) {
      hooks.on_checkpoint(log.back().step);
    }
  }
  return log;
}

FlowBindModel make_model(const WorldSpec& world, const ModelConfig& config,
                         std::uint64_t seed) {
  std::vector<ModalityInfo> modalities;
  for (const auto& v : world.views) modalities.push_back({v.name, v.dim()});
  return FlowBindModel(std::move(modalities), config, Rng(seed).split(streams::kInit));
}

}  // namespace flowbind
