#include "flowbind/networks/model.hpp"

#include <algorithm>

namespace flowbind {

namespace {

constexpr std::uint64_t kDriftStream = 100;
constexpr std::uint64_t kEncoderStream = 200;

std::vector<DriftNetwork> make_drifts(const std::vector<ModalityInfo>& modalities,
                                      const ModelConfig& config, const Rng& rng) {
  std::vector<DriftNetwork> out;
  DriftConfig dc{config.latent_dim, config.blocks, config.hidden_mult,
                 config.time_dim, config.zero_drift_head};
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].dim == 0 || modalities[i].dim > config.latent_dim) {
      throw ArgumentError("modality '" + modalities[i].name + "' has dim " +
                          std::to_string(modalities[i].dim) +
                          ", which does not fit latent dim " +
                          std::to_string(config.latent_dim));
    }
    Rng stream = rng.split(kDriftStream + i);
    out.emplace_back(dc, stream);
  }
  return out;
}

AuxEncoder make_encoder(const std::vector<ModalityInfo>& modalities,
                        const ModelConfig& config, const Rng& rng) {
  EncoderConfig ec;
  for (const auto& m : modalities) ec.modality_dims.push_back(m.dim);
  ec.latent_dim = config.latent_dim;
  ec.hidden = config.encoder_hidden;
  ec.latent_noise = config.latent_noise;
  Rng stream = rng.split(kEncoderStream);
  return AuxEncoder(ec, stream);
}

}  // namespace

FlowBindModel::FlowBindModel(std::vector<ModalityInfo> modalities,
                             const ModelConfig& config, const Rng& init_rng)
    : modalities_(std::move(modalities)),
      config_(config),
      drifts_(make_drifts(modalities_, config_, init_rng)),
      encoder_(make_encoder(modalities_, config_, init_rng)) {
  if (modalities_.empty()) throw ArgumentError("model needs at least one modality");
}

std::size_t FlowBindModel::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < modalities_.size(); ++i) {
    if (modalities_[i].name == name) return i;
  }
  throw ArgumentError("unknown modality '" + name + "'");
}

Matrix pad_columns(const Matrix& values, std::size_t width) {
  if (values.cols > width) {
    throw ShapeError("cannot pad " + std::to_string(values.cols) + " columns into " +
                     std::to_string(width));
  }
  Matrix out(values.rows, width, 0.0);
  for (std::size_t r = 0; r < values.rows; ++r) {
    std::copy(values.row(r).begin(), values.row(r).end(), out.row(r).begin());
  }
  return out;
}

Matrix take_columns(const Matrix& values, std::size_t width) {
  if (width > values.cols) {
    throw ShapeError("cannot take " + std::to_string(width) + " of " +
                     std::to_string(values.cols) + " columns");
  }
  Matrix out(values.rows, width);
  for (std::size_t r = 0; r < values.rows; ++r) {
    std::copy_n(values.row(r).begin(), width, out.row(r).begin());
  }
  return out;
}

Tensor FlowBindModel::embed(std::size_t i, const Matrix& values) const {
  if (values.cols != modalities_.at(i).dim) {
    throw ShapeError("modality '" + modalities_[i].name + "' expects " +
                     std::to_string(modalities_[i].dim) + " columns, got " +
                     std::to_string(values.cols));
  }
  return pad_columns(values, latent_dim()).to_tensor();
}

Matrix FlowBindModel::extract(std::size_t i, const Tensor& latent) const {
  return take_columns(Matrix::from_tensor(latent), modalities_.at(i).dim);
}

ParameterList FlowBindModel::drift_parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < drifts_.size(); ++i) {
    append_parameters(out, "drift." + modalities_[i].name, drifts_[i].parameters());
  }
  return out;
}

ParameterList FlowBindModel::encoder_parameters() const {
  ParameterList out;
  append_parameters(out, "encoder", encoder_.parameters());
  return out;
}

ParameterList FlowBindModel::parameters() const {
  ParameterList out = drift_parameters();
  for (auto& p : encoder_parameters()) out.push_back(std::move(p));
  return out;
}

FlowBindModel FlowBindModel::clone() const {
  FlowBindModel copy = *this;
  for (auto& d : copy.drifts_) d = d.clone();
  copy.encoder_ = encoder_.clone();
  return copy;
}

}  // namespace flowbind
