#pragma once

#include <cstddef>

#include "flowbind/networks/model.hpp"
#include "flowbind/synthdata/batch.hpp"

namespace flowbind {

inline constexpr std::size_t kVarianceNeighbors = 32;
inline constexpr std::size_t kVarianceMinSamples = 512;

/// Fraction Var(E[target | shared]) / Var(target), traces of covariances,
/// with the conditional mean estimated by leave-one-out k-NN regression in
/// `shared` space (Euclidean, ties by lower index). Clipped to [0, 1].
double explained_variance_fraction(const Matrix& shared, const Matrix& target,
                                   std::size_t k_nn = kVarianceNeighbors);

/// Explained variance of modality i given z* = H(z^S) (no latent noise) on
/// the rows of a standardized eval batch where i is present.
double explained_variance(const FlowBindModel& model, const ModalityBatch& batch,
                          std::size_t modality, std::size_t k_nn = kVarianceNeighbors);

/// Trace of the population covariance.
double total_variance(const Matrix& values);

}  // namespace flowbind
