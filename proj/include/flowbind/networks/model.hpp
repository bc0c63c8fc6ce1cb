#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "flowbind/networks/aux_encoder.hpp"
#include "flowbind/networks/drift_network.hpp"

namespace flowbind {

struct ModalityInfo {
  std::string name;
  std::size_t dim = 0;

  friend bool operator==(const ModalityInfo&, const ModalityInfo&) = default;
};

struct ModelConfig {
  std::size_t latent_dim = 16;
  std::size_t blocks = 3;
  std::size_t hidden_mult = 4;
  std::size_t time_dim = 32;
  std::size_t encoder_hidden = 64;
  double latent_noise = 0.05;
  bool zero_drift_head = false;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One drift network per modality plus the auxiliary encoder. Modality
/// latents of width d_i live in the first d_i coordinates of the shared
/// width; the remaining coordinates are zero on the data side.
class FlowBindModel {
 public:
  FlowBindModel(std::vector<ModalityInfo> modalities, const ModelConfig& config,
                const Rng& init_rng);

  const ModelConfig& config() const { return config_; }
  const std::vector<ModalityInfo>& modalities() const { return modalities_; }
  std::size_t modality_count() const { return modalities_.size(); }
  std::size_t latent_dim() const { return config_.latent_dim; }
  std::size_t index_of(const std::string& name) const;

  DriftNetwork& drift(std::size_t i) { return drifts_.at(i); }
  const DriftNetwork& drift(std::size_t i) const { return drifts_.at(i); }
  AuxEncoder& encoder() { return encoder_; }
  const AuxEncoder& encoder() const { return encoder_; }

  /// [n x d_i] -> [n x latent_dim], zero padded.
  Tensor embed(std::size_t i, const Matrix& values) const;
  /// [n x latent_dim] -> [n x d_i].
  Matrix extract(std::size_t i, const Tensor& latent) const;

  ParameterList drift_parameters() const;
  ParameterList encoder_parameters() const;
  ParameterList parameters() const;

  FlowBindModel clone() const;

 private:
  std::vector<ModalityInfo> modalities_;
  ModelConfig config_;
  std::vector<DriftNetwork> drifts_;
  AuxEncoder encoder_;
};

Matrix pad_columns(const Matrix& values, std::size_t width);
Matrix take_columns(const Matrix& values, std::size_t width);

}  // namespace flowbind
