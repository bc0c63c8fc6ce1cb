#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowbind/numcore/matrix.hpp"

namespace flowbind {

inline constexpr std::size_t kCknnaMaxSamples = 1024;
inline constexpr std::size_t kCknnaNeighbors = 10;

/// Sorted row indices of a deterministic subsample of at most `max_rows`
/// rows; a pure function of (n, max_rows, seed). Returns 0..n-1 if n fits.
std::vector<std::size_t> cknna_subsample(std::size_t n, std::size_t max_rows,
                                         std::uint64_t seed);

/// Indices of the k largest kernel values in each row, self excluded, ties
/// broken by lower index.
std::vector<std::vector<std::size_t>> kernel_top_k(const Matrix& kernel, std::size_t k);

/// Centered kernel alignment over mutual k-nearest neighbours, with linear
/// kernels on mean-centered, globally rescaled rows and the biased HSIC
/// estimator. Rows of X and Y are paired. Sets larger than `max_rows` are
/// subsampled with `seed`.
double cknna(const Matrix& x, const Matrix& y, std::size_t k = kCknnaNeighbors,
             std::uint64_t seed = 0, std::size_t max_rows = kCknnaMaxSamples);

}  // namespace flowbind
