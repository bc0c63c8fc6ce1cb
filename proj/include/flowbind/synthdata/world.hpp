#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flowbind/numcore/matrix.hpp"
#include "flowbind/numcore/rng.hpp"

namespace flowbind {

/// Invalid world, pairing, or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Nonlinearity { identity, tanh };

std::string to_string(Nonlinearity nl);
Nonlinearity parse_nonlinearity(const std::string& text);

/// One observed modality: z = nonlinearity(map * w + offset) + noise * eps.
struct ModalityView {
  std::string name;
  Matrix map;  // dim x hidden_dim
  std::vector<double> offset;
  Nonlinearity nonlinearity = Nonlinearity::identity;
  double noise = 0.0;

  std::size_t dim() const { return map.rows; }
  /// Square identity-nonlinearity view; these must be invertible.
  bool invertible_class() const {
    return map.rows == map.cols && nonlinearity == Nonlinearity::identity;
  }

  friend bool operator==(const ModalityView&, const ModalityView&) = default;
};

struct GaussianMixture {
  std::vector<std::vector<double>> means;
  std::vector<double> weights;
  double std = 1.0;  // isotropic per-component standard deviation

  friend bool operator==(const GaussianMixture&, const GaussianMixture&) = default;
};

struct WorldSpec {
  std::size_t hidden_dim = 2;
  GaussianMixture mixture;
  std::vector<ModalityView> views;

  std::size_t modality_count() const { return views.size(); }
  std::size_t index_of(const std::string& name) const;
  void validate() const;

  friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

/// Bit i set <=> modality i present.
using ModalitySubset = std::uint32_t;

struct PairingEntry {
  ModalitySubset subset = 0;
  double probability = 0.0;

  friend bool operator==(const PairingEntry&, const PairingEntry&) = default;
};

/// Distribution over which modality subsets a training row observes.
struct PairingSpec {
  std::vector<PairingEntry> entries;

  void validate(std::size_t modality_count) const;
  ModalitySubset draw(Rng& rng) const;
  /// Keeps only subsets containing `modality`, renormalized.
  PairingSpec restricted_to(std::size_t modality) const;
  /// Removes the listed subsets, renormalized.
  PairingSpec without(const std::vector<ModalitySubset>& excluded) const;
  /// Builds a spec from unnormalized weights.
  static PairingSpec from_weights(std::vector<PairingEntry> weighted);

  friend bool operator==(const PairingSpec&, const PairingSpec&) = default;
};

std::string subset_to_string(ModalitySubset s, const WorldSpec& world);
ModalitySubset parse_subset(const std::string& text, const WorldSpec& world);
std::size_t subset_size(ModalitySubset s);

/// Rank of a dense matrix by partial-pivot elimination.
std::size_t matrix_rank(const Matrix& m, double tol = 1e-10);

/// Three-modality toy world: T (identity 2-D), I (tanh-linear 3-D),
/// A (linear 2-D) over a 2-D four-component mixture.
WorldSpec default_world();
/// Pairwise subsets weighted 272:91:184 (T-I, T-A, I-A), no triplets.
PairingSpec default_pairing(const WorldSpec& world);

}  // namespace flowbind
