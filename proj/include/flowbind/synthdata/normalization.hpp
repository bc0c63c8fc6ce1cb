#pragma once

#include <cstddef>
#include <vector>

#include "flowbind/synthdata/batch.hpp"

namespace flowbind {

inline constexpr double kStdFloor = 1e-6;

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Streaming coordinate-wise mean / population std per modality (Welford).
class NormalizationAccumulator {
 public:
  explicit NormalizationAccumulator(std::vector<std::size_t> dims);

  void add(const ModalityBatch& batch);
  std::vector<NormStats> finish() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<double>> means_;
  std::vector<std::vector<double>> m2_;
};

std::vector<NormStats> normalization_stats(const std::vector<ModalityBatch>& stream);

/// (z - mean) / std on present entries; absent entries stay NaN.
ModalityBatch standardize(const ModalityBatch& batch,
                          const std::vector<NormStats>& stats);
Matrix standardize(const Matrix& values, const NormStats& stats);
Matrix destandardize(const Matrix& values, const NormStats& stats);

}  // namespace flowbind
