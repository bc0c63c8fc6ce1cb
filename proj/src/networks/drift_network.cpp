#include "flowbind/networks/drift_network.hpp"

namespace flowbind {

DriftNetwork::DriftNetwork(const DriftConfig& config, Rng& rng)
    : config_(config), embedding_(config.time_dim) {
  if (config.latent_dim == 0 || config.hidden_mult == 0) {
    throw ArgumentError("drift network widths must be positive");
  }
  const std::size_t d = config.latent_dim;
  const std::size_t c = config.time_dim;
  const std::size_t hidden = config.hidden_mult * d;
  time_in_ = Linear::uniform(c, c, rng);
  time_out_ = Linear::uniform(c, c, rng);
  for (std::size_t l = 0; l < config.blocks; ++l) {
    Block b;
    b.shift = Linear::uniform(c, d, rng);
    b.scale = Linear::uniform(c, d, rng);
    b.gate = Linear::zeros(c, d);
    b.fc1 = Linear::uniform(d, hidden, rng);
    b.fc2 = Linear::uniform(hidden, d, rng);
    blocks_.push_back(std::move(b));
  }
  head_ = Linear::uniform(d, d, rng);
  if (config.zero_head) {
    head_ = Linear::zeros(d, d);
  } else {
    // Zero bias so the zero latent maps to the zero velocity at init.
    head_.bias = Tensor::zeros({d}, true);
  }
}

Tensor DriftNetwork::operator()(const Tensor& z, const Tensor& t) const {
  if (z.rank() != 2 || z.cols() != width()) {
    throw ShapeError("drift network expects [B x " + std::to_string(width()) +
                     "], got " + shape_to_string(z.shape()));
  }
  if (t.rank() != 1 || t.numel() != z.rows()) {
    throw ShapeError("drift network: time tensor " + shape_to_string(t.shape()) +
                     " does not match batch of " + std::to_string(z.rows()));
  }
  for (double v : t.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ArgumentError("drift network: time " + std::to_string(v) +
                          " outside [0, 1]");
    }
  }
  const Tensor cond = silu(time_out_(silu(time_in_(embedding_.embed(t.data())))));
  Tensor x = z;
  for (const auto& b : blocks_) {
    Tensor h = layer_norm(x);
    h = add(add(h, mul(h, b.scale(cond))), b.shift(cond));
    const Tensor update = b.fc2(silu(b.fc1(h)));
    x = add(x, mul(b.gate(cond), update));
  }
  return head_(x);
}

Tensor DriftNetwork::operator()(const Tensor& z, double t) const {
  return (*this)(z, Tensor::full({z.rows()}, t));
}

ParameterList DriftNetwork::parameters() const {
  ParameterList out;
  append_parameters(out, "time_in", time_in_.parameters());
  append_parameters(out, "time_out", time_out_.parameters());
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = "blocks." + std::to_string(l);
    append_parameters(out, p + ".shift", blocks_[l].shift.parameters());
    append_parameters(out, p + ".scale", blocks_[l].scale.parameters());
    append_parameters(out, p + ".gate", blocks_[l].gate.parameters());
    append_parameters(out, p + ".fc1", blocks_[l].fc1.parameters());
    append_parameters(out, p + ".fc2", blocks_[l].fc2.parameters());
  }
  append_parameters(out, "head", head_.parameters());
  return out;
}

DriftNetwork DriftNetwork::clone() const {
  DriftNetwork copy = *this;
  copy.time_in_ = time_in_.clone();
  copy.time_out_ = time_out_.clone();
  for (auto& b : copy.blocks_) {
    b.shift = b.shift.clone();
    b.scale = b.scale.clone();
    b.gate = b.gate.clone();
    b.fc1 = b.fc1.clone();
    b.fc2 = b.fc2.clone();
  }
  copy.head_ = head_.clone();
  return copy;
}

Tensor drift_eval(const DriftNetwork& net, const Tensor& z, const Tensor& t) {
  return net(z, t);
}

}  // namespace flowbind
