#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "flowbind/analysis/cknna.hpp"
#include "flowbind/analysis/variance.hpp"
#include "flowbind/flowrt/inference.hpp"

namespace flowbind {

struct EvalSettings {
  std::size_t samples = 4096;       // eval rows drawn from the world
  std::size_t cknna_k = kCknnaNeighbors;
  std::size_t cknna_max = kCknnaMaxSamples;
  std::size_t knn = kVarianceNeighbors;
  std::size_t interp_steps = 9;

  friend bool operator==(const EvalSettings&, const EvalSettings&) = default;
};

struct PairAlignment {
  std::size_t a = 0;
  std::size_t b = 0;
  double raw = 0.0;       // CKNNA between standardized modality latents
  double shared = 0.0;    // CKNNA between their encode_to_shared images
  double shuffled = 0.0;  // shared CKNNA after permuting the rows of b
};

/// Standardized, zero-padded latents of one modality in an all-present batch.
Tensor padded_latents(const FlowBindModel& model, const ModalityBatch& standardized,
                      std::size_t modality);

/// Alignment for the requested pairs on a standardized batch where both
/// modalities of each pair are present on every row.
std::vector<PairAlignment> alignment_report(
    const FlowBindModel& model, const ModalityBatch& standardized,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const SolverSpec& solver,
    const EvalSettings& settings, std::uint64_t seed);

/// Every unordered pair of distinct modalities.
std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t modality_count);

}  // namespace flowbind
