#include "flowbind/synthdata/world.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

namespace flowbind {

namespace {

constexpr double kProbabilityTolerance = 1e-9;

}  // namespace

std::string to_string(Nonlinearity nl) {
  return nl == Nonlinearity::tanh ? "tanh" : "identity";
}

Nonlinearity parse_nonlinearity(const std::string& text) {
  if (text == "identity") return Nonlinearity::identity;
  if (text == "tanh") return Nonlinearity::tanh;
  throw ConfigError("unknown nonlinearity '" + text + "' (expected identity|tanh)");
}

std::size_t WorldSpec::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].name == name) return i;
  }
  throw ConfigError("unknown modality '" + name + "'");
}

void WorldSpec::validate() const {
  if (hidden_dim == 0) throw ConfigError("world.hidden_dim must be positive");
  if (mixture.means.empty()) throw ConfigError("world.mixture needs at least one component");
  if (mixture.weights.size() != mixture.means.size()) {
    throw ConfigError("world.mixture_weights has " +
                      std::to_string(mixture.weights.size()) + " entries for " +
                      std::to_string(mixture.means.size()) + " components");
  }
  for (const auto& m : mixture.means) {
    if (m.size() != hidden_dim) {
      throw ConfigError("world.mixture_means entry has wrong dimension");
    }
  }
  double total = 0.0;
  for (double w : mixture.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("world.mixture_weights must be non-negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw ConfigError("world.mixture_weights must sum to 1");
  }
  if (!(mixture.std >= 0.0)) throw ConfigError("world.mixture_std must be >= 0");
  if (views.empty() || views.size() > 32) {
    throw ConfigError("world needs between 1 and 32 modalities");
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    if (v.name.empty()) throw ConfigError("modality name must not be empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (views[j].name == v.name) {
        throw ConfigError("duplicate modality name '" + v.name + "'");
      }
    }
    if (v.map.cols != hidden_dim || v.map.rows == 0) {
      throw ConfigError("modality." + v.name + ".map must be dim x " +
                        std::to_string(hidden_dim));
    }
    if (v.offset.size() != v.map.rows) {
      throw ConfigError("modality." + v.name + ".offset must have " +
                        std::to_string(v.map.rows) + " entries");
    }
    if (!(v.noise >= 0.0)) {
      throw ConfigError("modality." + v.name + ".noise must be >= 0");
    }
    if (v.invertible_class() && matrix_rank(v.map) != v.map.rows) {
      throw ConfigError("modality." + v.name +
                        ".map is square with identity nonlinearity but singular");
    }
  }
}

std::size_t subset_size(ModalitySubset s) {
  return static_cast<std::size_t>(std::popcount(s));
}

void PairingSpec::validate(std::size_t modality_count) const {
  if (entries.empty()) throw ConfigError("pairing needs at least one subset");
  double total = 0.0;
  for (const auto& e : entries) {
    if (e.subset == 0) throw ConfigError("pairing subsets must be non-empty");
    if (modality_count < 32 && (e.subset >> modality_count) != 0) {
      throw ConfigError("pairing subset refers to an unknown modality");
    }
    if (!(e.probability >= 0.0) || !std::isfinite(e.probability)) {
      throw ConfigError("pairing probabilities must be non-negative");
    }
    total += e.probability;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw ConfigError("pairing probabilities must sum to 1");
  }
}

ModalitySubset PairingSpec::draw(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& e : entries) {
    acc += e.probability;
    if (u < acc) return e.subset;
  }
  // Rounding can leave acc slightly below 1; fall back to the last
  // subset with positive mass.
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->probability > 0.0) return it->subset;
  }
  throw ConfigError("pairing has no subset with positive probability");
}

PairingSpec PairingSpec::from_weights(std::vector<PairingEntry> weighted) {
  double total = 0.0;
  for (const auto& e : weighted) total += e.probability;
  if (!(total > 0.0)) throw ConfigError("pairing weights must have positive sum");
  for (auto& e : weighted) e.probability /= total;
  return PairingSpec{std::move(weighted)};
}

PairingSpec PairingSpec::restricted_to(std::size_t modality) const {
  std::vector<PairingEntry> kept;
  for (const auto& e : entries) {
    if (e.subset & (ModalitySubset{1} << modality)) kept.push_back(e);
  }
  return from_weights(std::move(kept));
}

PairingSpec PairingSpec::without(const std::vector<ModalitySubset>& excluded) const {
  std::vector<PairingEntry> kept;
  for (const auto& e : entries) {
    if (std::find(excluded.begin(), excluded.end(), e.subset) == excluded.end()) {
      kept.push_back(e);
    }
  }
  return from_weights(std::move(kept));
}

std::string subset_to_string(ModalitySubset s, const WorldSpec& world) {
  std::string out;
  for (std::size_t i = 0; i < world.views.size(); ++i) {
    if (s & (ModalitySubset{1} << i)) {
      if (!out.empty()) out += '+';
      out += world.views[i].name;
    }
  }
  return out;
}

ModalitySubset parse_subset(const std::string& text, const WorldSpec& world) {
  ModalitySubset s = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('+', start), text.size());
    const std::string name = text.substr(start, end - start);
    const ModalitySubset bit = ModalitySubset{1} << world.index_of(name);
    if (s & bit) throw ConfigError("modality '" + name + "' repeated in subset");
    s |= bit;
    start = end + 1;
  }
  return s;
}

std::size_t matrix_rank(const Matrix& m, double tol) {
  Matrix a = m;
  std::size_t rank = 0;
  std::vector<bool> used(a.rows, false);
  for (std::size_t c = 0; c < a.cols; ++c) {
    std::size_t pivot = a.rows;
    double best = tol;
    for (std::size_t r = 0; r < a.rows; ++r) {
      if (!used[r] && std::abs(a(r, c)) > best) {
        best = std::abs(a(r, c));
        pivot = r;
      }
    }
    if (pivot == a.rows) continue;
    used[pivot] = true;
    ++rank;
    for (std::size_t r = 0; r < a.rows; ++r) {
      if (r == pivot) continue;
      const double f = a(r, c) / a(pivot, c);
      for (std::size_t k = c; k < a.cols; ++k) a(r, k) -= f * a(pivot, k);
    }
  }
  return rank;
}

WorldSpec default_world() {
  WorldSpec w;
  w.hidden_dim = 2;
  w.mixture.means = {{-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}, {1.0, 1.0}};
  w.mixture.weights = {0.25, 0.25, 0.25, 0.25};
  w.mixture.std = 0.45;
  w.views.push_back({"T", Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}), {0.0, 0.0},
                     Nonlinearity::identity, 0.02});
  w.views.push_back({"I", Matrix(3, 2, {0.8, -0.4, 0.3, 0.7, 0.5, 0.5}),
                     {0.1, -0.2, 0.0}, Nonlinearity::tanh, 0.02});
  w.views.push_back({"A", Matrix(2, 2, {0.9, -1.2, 1.2, 0.9}), {1.0, -0.5},
                     Nonlinearity::identity, 0.02});
  return w;
}

PairingSpec default_pairing(const WorldSpec& world) {
  return PairingSpec::from_weights({{parse_subset("T+I", world), 272.0},
                                    {parse_subset("T+A", world), 91.0},
                                    {parse_subset("I+A", world), 184.0}});
}

}  // namespace flowbind
