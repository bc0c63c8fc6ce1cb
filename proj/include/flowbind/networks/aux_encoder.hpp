#pragma once

#include <cstddef>
#include <vector>

#include "flowbind/networks/linear.hpp"
#include "flowbind/synthdata/batch.hpp"

namespace flowbind {

struct EncoderConfig {
  std::vector<std::size_t> modality_dims;
  std::size_t latent_dim = 16;
  std::size_t hidden = 64;
  double latent_noise = 0.05;  // sigma*, applied in train mode only
  bool zero_output = true;     // start from the constant z* = 0
};

/// Per-modality two-layer heads whose outputs are averaged into z*.
class AuxEncoder {
 public:
  AuxEncoder(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }
  std::size_t modality_count() const { return heads_.size(); }
  std::size_t latent_dim() const { return config_.latent_dim; }

  /// Head i applied to [n x d_i] inputs.
  Tensor head_output(std::size_t modality, const Tensor& x) const;

  /// First linear layer then output layer of head i (exposed for tests).
  Linear& head_layer(std::size_t modality, std::size_t layer);

  ParameterList parameters() const;
  AuxEncoder clone() const;

 private:
  struct Head {
    Linear in, out;
  };
  EncoderConfig config_;
  std::vector<Head> heads_;
};

/// z* = mean of the present heads' outputs, plus N(0, sigma*^2) noise when
/// train_mode is set. Modalities are summed in index order, so the result
/// does not depend on how the caller enumerates them.
Tensor encode_shared(const AuxEncoder& enc, const ModalityBatch& batch, Rng& rng,
                     bool train_mode);

}  // namespace flowbind
