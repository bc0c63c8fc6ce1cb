#include "flowbind/flowrt/inference.hpp"

#include <algorithm>

namespace flowbind {

Tensor encode_to_shared(const Tensor& z_i, const DriftNetwork& net, const SolverSpec& spec) {
  return ode_solve(z_i, net, 1.0, 0.0, spec);
}

Tensor decode_from_shared(const Tensor& z_star, const DriftNetwork& net,
                          const SolverSpec& spec) {
  return ode_solve(z_star, net, 0.0, 1.0, spec);
}

Tensor aggregate_latents(const std::vector<Tensor>& estimates) {
  if (estimates.empty()) throw ArgumentError("aggregate_latents: no estimates");
  const Tensor& first = estimates.front();
  for (const auto& e : estimates) {
    if (e.shape() != first.shape()) {
      throw ShapeError("aggregate_latents: estimates have different shapes");
    }
  }
  // Mean as first + sum of deviations / k, which is exact for identical inputs.
  const double k = static_cast<double>(estimates.size());
  std::vector<double> out(first.data().begin(), first.data().end());
  std::vector<double> dev(out.size(), 0.0);
  for (std::size_t s = 1; s < estimates.size(); ++s) {
    const auto d = estimates[s].data();
    for (std::size_t j = 0; j < out.size(); ++j) dev[j] += d[j] - out[j];
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += dev[j] / k;
  return Tensor(first.shape(), std::move(out));
}

Tensor shared_from_sources(const TranslationRequest& request, const FlowBindModel& model,
                           const std::vector<NormStats>& stats) {
  if (request.sources.empty()) throw ArgumentError("translate: no source modality");
  if (stats.size() != model.modality_count()) {
    throw ArgumentError("translate: normalization stats do not match the model");
  }
  std::vector<const SourceLatents*> ordered;
  for (const auto& s : request.sources) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const SourceLatents* a, const SourceLatents* b) {
              return a->modality < b->modality;
            });
  std::vector<Tensor> estimates;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    const SourceLatents& s = *ordered[k];
    if (s.modality >= model.modality_count()) {
      throw ArgumentError("translate: unknown source modality index " +
                          std::to_string(s.modality));
    }
    if (k > 0 && ordered[k - 1]->modality == s.modality) {
      throw ArgumentError("translate: modality '" + model.modalities()[s.modality].name +
                          "' given twice");
    }
    if (s.values.rows != ordered.front()->values.rows) {
      throw ShapeError("translate: sources have different row counts");
    }
    const Tensor z = model.embed(s.modality, standardize(s.values, stats[s.modality]));
    estimates.push_back(encode_to_shared(z, model.drift(s.modality), request.solver));
  }
  return aggregate_latents(estimates);
}

Matrix decode_target(const Tensor& z_star, std::size_t target, const FlowBindModel& model,
                     const std::vector<NormStats>& stats, const SolverSpec& spec) {
  if (target >= model.modality_count()) {
    throw ArgumentError("translate: unknown target modality index " + std::to_string(target));
  }
  const Tensor z = decode_from_shared(z_star, model.drift(target), spec);
  return destandardize(model.extract(target, z), stats.at(target));
}

Matrix translate(const TranslationRequest& request, const FlowBindModel& model,
                 const std::vector<NormStats>& stats) {
  request.solver.validate();
  if (request.target >= model.modality_count()) {
    throw ArgumentError("translate: unknown target modality index " +
                        std::to_string(request.target));
  }
  if (!request.sources.empty() && request.sources.front().values.rows == 0) {
    return Matrix(0, model.modalities()[request.target].dim);
  }
  const Tensor z_star = shared_from_sources(request, model, stats);
  return decode_target(z_star, request.target, model, stats, request.solver);
}

std::vector<Matrix> latent_interpolate(const Tensor& z_a, const Tensor& z_b,
                                       std::size_t steps, std::size_t target,
                                       const FlowBindModel& model,
                                       const std::vector<NormStats>& stats,
                                       const SolverSpec& spec) {
  if (steps < 2) throw ArgumentError("latent_interpolate: steps must be >= 2");
  if (z_a.shape() != z_b.shape()) {
    throw ShapeError("latent_interpolate: endpoints have different shapes");
  }
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < steps; ++k) {
    const double l = static_cast<double>(k) / static_cast<double>(steps - 1);
    Tensor z;
    if (k == 0) {
      z = z_a;
    } else if (k + 1 == steps) {
      z = z_b;
    } else {
      std::vector<double> mix(z_a.numel());
      for (std::size_t j = 0; j < mix.size(); ++j) {
        mix[j] = (1.0 - l) * z_a.data()[j] + l * z_b.data()[j];
      }
      z = Tensor(z_a.shape(), std::move(mix));
    }
    out.push_back(decode_target(z, target, model, stats, spec));
  }
  return out;
}

}  // namespace flowbind
