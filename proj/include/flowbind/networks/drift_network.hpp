#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowbind/networks/linear.hpp"
#include "flowbind/networks/time_embedding.hpp"

namespace flowbind {

struct DriftConfig {
  std::size_t latent_dim = 16;
  std::size_t blocks = 3;
  std::size_t hidden_mult = 4;
  std::size_t time_dim = 32;
  bool zero_head = false;
};

/// Time-conditioned residual MLP v(z, t) on [B x latent_dim].
///
/// Each block computes x + g(t) * MLP(LN(x) * (1 + scale(t)) + shift(t)),
/// where shift, scale and gate come from a shared time-embedding MLP. Gates
/// start at exactly zero, so a fresh network reduces to its linear head and
/// ignores t entirely.
class DriftNetwork {
 public:
  DriftNetwork(const DriftConfig& config, Rng& rng);

  const DriftConfig& config() const { return config_; }
  std::size_t width() const { return config_.latent_dim; }

  /// z: [B x width], t: [B] with values in [0, 1].
  Tensor operator()(const Tensor& z, const Tensor& t) const;
  Tensor operator()(const Tensor& z, double t) const;

  Linear& head() { return head_; }
  const Linear& head() const { return head_; }

  ParameterList parameters() const;
  DriftNetwork clone() const;

 private:
  struct Block {
    Linear shift, scale, gate, fc1, fc2;
  };

  DriftConfig config_;
  TimeEmbedding embedding_;
  Linear time_in_, time_out_;
  std::vector<Block> blocks_;
  Linear head_;
};

Tensor drift_eval(const DriftNetwork& net, const Tensor& z, const Tensor& t);

}  // namespace flowbind
