#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbind/analysis/ablation.hpp"

namespace flowbind {

/// Text anchor, image-audio pair held out (for the default world).
AblationSpec default_ablation(const WorldSpec& world);

/// Complete experiment description. Pairing weights are kept as written and
/// normalized on use, so serialization round-trips exactly.
struct ExperimentConfig {
  WorldSpec world = default_world();
  std::vector<PairingEntry> pairing_weights = default_pairing(default_world()).entries;
  ModelConfig model;
  TrainConfig train;
  SolverSpec solver;
  EvalSettings eval;
  AblationSpec ablation = default_ablation(default_world());
  std::size_t decompose_joints = 20;
  std::size_t interp_source = 1;
  std::size_t interp_target = 2;

  PairingSpec pairing() const { return PairingSpec::from_weights(pairing_weights); }
  std::uint64_t seed() const { return train.seed; }
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses the sectioned `key = value` format. Unknown sections or keys,
/// malformed numbers and failed validation raise ConfigError naming the
/// line and key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text with shortest round-trip number formatting.
std::string serialize_config(const ExperimentConfig& config);

std::string format_double(double v);

}  // namespace flowbind
