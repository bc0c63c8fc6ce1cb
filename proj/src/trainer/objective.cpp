#include "flowbind/trainer/objective.hpp"

#include <memory>

namespace flowbind {

Tensor interpolate(const Tensor& z_star, const Tensor& z_i, const Tensor& t) {
  if (z_star.shape() != z_i.shape() || z_star.rank() != 2) {
    throw ShapeError("interpolate: z* " + shape_to_string(z_star.shape()) +
                     " vs z_i " + shape_to_string(z_i.shape()));
  }
  if (t.rank() != 1 || t.numel() != z_i.rows()) {
    throw ShapeError("interpolate: time tensor does not match batch");
  }
  std::vector<double> rest(t.numel());
  for (std::size_t b = 0; b < rest.size(); ++b) {
    const double tb = t.data()[b];
    if (!(tb >= 0.0 && tb <= 1.0)) throw ArgumentError("interpolate: t outside [0, 1]");
    rest[b] = 1.0 - tb;
  }
  return add(scale_rows(z_i, t), scale_rows(z_star, Tensor::vector(std::move(rest))));
}

PolicyLatents apply_gradient_policy(const Tensor& t, const Tensor& z_star,
                                    bool detach_target) {
  if (t.rank() != 1 || t.numel() != z_star.rows()) {
    throw ShapeError("gradient policy: time tensor does not match z*");
  }
  const std::size_t n = t.numel();
  // std::vector<bool> has no contiguous storage to hand out as a span.
  std::unique_ptr<bool[]> live(new bool[n]);
  std::size_t live_count = 0;
  for (std::size_t b = 0; b < n; ++b) {
    live[b] = t.data()[b] == 0.0;
    live_count += live[b] ? 1 : 0;
  }
  Tensor mixed;
  if (live_count == n) {
    mixed = z_star;
  } else if (live_count == 0) {
    mixed = detach(z_star);
  } else {
    mixed = where_rows({live.get(), n}, z_star, detach(z_star));
  }
  return {mixed, detach_target ? mixed : z_star};
}

FmLoss fm_loss_terms(const FlowBindModel& model, const ModalityBatch& batch,
                     const PolicyLatents& z_star, const Tensor& t) {
  if (batch.modality_count() != model.modality_count()) {
    throw ShapeError("fm_loss: batch and model disagree on modality count");
  }
  if (z_star.interp.rows() != batch.rows || z_star.target.rows() != batch.rows ||
      t.numel() != batch.rows) {
    throw ShapeError("fm_loss: z* or t does not match the batch");
  }
  FmLoss out;
  out.residual_sq.assign(model.modality_count(), 0.0);
  out.counts.assign(model.modality_count(), 0);
  Tensor total;
  bool any = false;
  for (std::size_t i = 0; i < model.modality_count(); ++i) {
    const auto rows = batch.present_rows(i);
    if (rows.empty()) continue;
    const Tensor z_i = model.embed(i, batch.latents[i].select_rows(rows));
    std::vector<double> t_rows(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) t_rows[r] = t.data()[rows[r]];
    const Tensor t_i = Tensor::vector(std::move(t_rows));
    const Tensor z_t = interpolate(index_rows(z_star.interp, rows), z_i, t_i);
    const Tensor target = sub(z_i, index_rows(z_star.target, rows));
    const Tensor sq = sum_squares(sub(model.drift(i)(z_t, t_i), target));
    out.residual_sq[i] = sq.item();
    out.counts[i] = rows.size();
    out.terms += rows.size();
    total = any ? add(total, sq) : sq;
    any = true;
  }
  if (!any) throw ArgumentError("fm_loss: no present modality in the batch");
  out.loss = scale(total, 1.0 / static_cast<double>(out.terms));
  return out;
}

Tensor fm_loss(const FlowBindModel& model, const ModalityBatch& batch,
               const Tensor& z_star, const Tensor& t) {
  return fm_loss_terms(model, batch, apply_gradient_policy(t, z_star), t).loss;
}

}  // namespace flowbind
