#include "flowbind/networks/aux_encoder.hpp"

namespace flowbind {

AuxEncoder::AuxEncoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  if (config.latent_dim == 0 || config.hidden == 0) {
    throw ArgumentError("encoder widths must be positive");
  }
  if (!(config.latent_noise >= 0.0)) {
    throw ArgumentError("encoder latent noise must be non-negative");
  }
  for (std::size_t dim : config.modality_dims) {
    if (dim == 0) throw ArgumentError("encoder modality dim must be positive");
    Head h;
    h.in = Linear::uniform(dim, config.hidden, rng);
    h.out = config.zero_output ? Linear::zeros(config.hidden, config.latent_dim)
                               : Linear::uniform(config.hidden, config.latent_dim, rng);
    heads_.push_back(std::move(h));
  }
}

Tensor AuxEncoder::head_output(std::size_t modality, const Tensor& x) const {
  if (modality >= heads_.size()) {
    throw ArgumentError("encoder has no head for modality " + std::to_string(modality));
  }
  const Head& h = heads_[modality];
  return h.out(silu(h.in(x)));
}

Linear& AuxEncoder::head_layer(std::size_t modality, std::size_t layer) {
  if (modality >= heads_.size() || layer > 1) {
    throw ArgumentError("encoder head layer out of range");
  }
  return layer == 0 ? heads_[modality].in : heads_[modality].out;
}

ParameterList AuxEncoder::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    const std::string p = "heads." + std::to_string(i);
    append_parameters(out, p + ".in", heads_[i].in.parameters());
    append_parameters(out, p + ".out", heads_[i].out.parameters());
  }
  return out;
}

AuxEncoder AuxEncoder::clone() const {
  AuxEncoder copy = *this;
  for (auto& h : copy.heads_) {
    h.in = h.in.clone();
    h.out = h.out.clone();
  }
  return copy;
}

Tensor encode_shared(const AuxEncoder& enc, const ModalityBatch& batch, Rng& rng,
                     bool train_mode) {
  if (batch.modality_count() != enc.modality_count()) {
    throw ShapeError("batch has " + std::to_string(batch.modality_count()) +
                     " modalities, encoder has " +
                     std::to_string(enc.modality_count()));
  }
  const std::size_t rows = batch.rows;
  std::vector<double> inv_count(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = batch.present_count(r);
    if (c == 0) {
      throw ArgumentError("encode_shared: row " + std::to_string(r) +
                          " has no present modality");
    }
    inv_count[r] = 1.0 / static_cast<double>(c);
  }
  Tensor total;
  bool any = false;
  for (std::size_t i = 0; i < batch.modality_count(); ++i) {
    const auto present = batch.present_rows(i);
    if (present.empty()) continue;
    Tensor part = scatter_rows(enc.head_output(i, batch.gather(i)), present, rows);
    total = any ? add(total, part) : part;
    any = true;
  }
  if (!any) throw ArgumentError("encode_shared: empty batch");
  Tensor z = scale_rows(total, Tensor::vector(std::move(inv_count)));
  const double sigma = enc.config().latent_noise;
  if (train_mode && sigma > 0.0) {
    std::vector<double> noise(z.numel());
    for (double& v : noise) v = sigma * rng.normal();
    z = add(z, Tensor::matrix(z.rows(), z.cols(), std::move(noise)));
  }
  return z;
}

}  // namespace flowbind
