#include "flowbind/analysis/alignment.hpp"

#include <numeric>

namespace flowbind {

namespace {

void require_all_present(const FlowBindModel& model, const ModalityBatch& batch,
                         std::size_t modality) {
  if (batch.present_rows(modality).size() != batch.rows) {
    throw ArgumentError("modality '" + model.modalities().at(modality).name +
                        "' is not present on every eval row");
  }
}

}  // namespace

Tensor padded_latents(const FlowBindModel& model, const ModalityBatch& standardized,
                      std::size_t modality) {
  require_all_present(model, standardized, modality);
  return model.embed(modality, standardized.latents[modality]);
}

std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t modality_count) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < modality_count; ++a) {
    for (std::size_t b = a + 1; b < modality_count; ++b) out.emplace_back(a, b);
  }
  return out;
}

std::vector<PairAlignment> alignment_report(
    const FlowBindModel& model, const ModalityBatch& standardized,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const SolverSpec& solver,
    const EvalSettings& settings, std::uint64_t seed) {
  const auto rows = cknna_subsample(standardized.rows, settings.cknna_max, seed);
  const ModalityBatch eval = standardized.select_rows(rows);
  std::vector<Matrix> shared(model.modality_count());
  const auto encoded = [&](std::size_t i) -> const Matrix& {
    if (shared[i].rows == 0) {
      shared[i] = Matrix::from_tensor(
          encode_to_shared(padded_latents(model, eval, i), model.drift(i), solver));
    }
    return shared[i];
  };
  std::vector<std::size_t> perm(eval.rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng(seed).split(eval.rows + 1);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<PairAlignment> out;
  for (const auto& [a, b] : pairs) {
    if (a >= model.modality_count() || b >= model.modality_count() || a == b) {
      throw ArgumentError("alignment_report: invalid modality pair");
    }
    require_all_present(model, eval, a);
    require_all_present(model, eval, b);
    PairAlignment row{a, b};
    row.raw = cknna(eval.latents[a], eval.latents[b], settings.cknna_k, seed, settings.cknna_max);
    row.shared = cknna(encoded(a), encoded(b), settings.cknna_k, seed, settings.cknna_max);
    row.shuffled = cknna(encoded(a), encoded(b).select_rows(perm), settings.cknna_k, seed,
                         settings.cknna_max);
    out.push_back(row);
  }
  return out;
}

}  // namespace flowbind
