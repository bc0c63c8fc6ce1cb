#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "flowbind/numcore/matrix.hpp"
#include "flowbind/numcore/rng.hpp"
#include "flowbind/synthdata/world.hpp"

namespace flowbind {

/// Partially paired rows. Absent entries hold NaN, so any accidental read
/// fails the finiteness check when converted to a Tensor.
struct ModalityBatch {
  std::size_t rows = 0;
  std::vector<Matrix> latents;        // one rows x d_i block per modality
  std::vector<std::vector<bool>> present;  // [modality][row]
  std::optional<Matrix> hidden;       // ground truth, evaluation batches only

  std::size_t modality_count() const { return latents.size(); }
  bool is_present(std::size_t modality, std::size_t row) const {
    return present[modality][row];
  }
  std::vector<std::size_t> present_rows(std::size_t modality) const;
  std::size_t present_count(std::size_t row) const;
  /// Present entries of one modality as a [n_i x d_i] tensor.
  Tensor gather(std::size_t modality) const;
  /// Sub-batch over the given rows.
  ModalityBatch select_rows(const std::vector<std::size_t>& rows) const;

  void validate() const;
};

/// Draws `rows` samples: hidden w from the mixture, one subset per row from
/// `pairing`. Noise is drawn for every modality so the stream consumption
/// does not depend on the pairing.
ModalityBatch sample_batch(const WorldSpec& world, const PairingSpec& pairing,
                           std::size_t rows, Rng& rng, bool keep_hidden = false);

/// Every modality present on every row, ground truth kept.
ModalityBatch sample_paired(const WorldSpec& world, std::size_t rows, Rng& rng);

}  // namespace flowbind
