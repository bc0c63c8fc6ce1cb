#include "flowbind/synthdata/normalization.hpp"

#include <algorithm>
#include <cmath>

namespace flowbind {

NormalizationAccumulator::NormalizationAccumulator(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), counts_(dims_.size(), 0) {
  for (std::size_t d : dims_) {
    means_.emplace_back(d, 0.0);
    m2_.emplace_back(d, 0.0);
  }
}

void NormalizationAccumulator::add(const ModalityBatch& batch) {
  if (batch.modality_count() != dims_.size()) {
    throw ShapeError("normalization: batch has wrong modality count");
  }
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (batch.latents[i].cols != dims_[i]) {
      throw ShapeError("normalization: modality width changed mid-stream");
    }
    for (std::size_t r = 0; r < batch.rows; ++r) {
      if (!batch.is_present(i, r)) continue;
      const double n = static_cast<double>(++counts_[i]);
      const auto row = batch.latents[i].row(r);
      for (std::size_t c = 0; c < dims_[i]; ++c) {
        const double delta = row[c] - means_[i][c];
        means_[i][c] += delta / n;
        m2_[i][c] += delta * (row[c] - means_[i][c]);
      }
    }
  }
}

std::vector<NormStats> NormalizationAccumulator::finish() const {
  std::vector<NormStats> out;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (counts_[i] < 2) {
      throw ArgumentError("normalization: modality " + std::to_string(i) +
                          " observed " + std::to_string(counts_[i]) +
                          " times (need >= 2)");
    }
    NormStats s;
    s.mean = means_[i];
    s.std.resize(dims_[i]);
    for (std::size_t c = 0; c < dims_[i]; ++c) {
      s.std[c] = std::max(
          kStdFloor, std::sqrt(m2_[i][c] / static_cast<double>(counts_[i])));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<NormStats> normalization_stats(const std::vector<ModalityBatch>& stream) {
  if (stream.empty()) throw ArgumentError("normalization: empty batch stream");
  std::vector<std::size_t> dims;
  for (const auto& m : stream.front().latents) dims.push_back(m.cols);
  NormalizationAccumulator acc(dims);
  for (const auto& b : stream) acc.add(b);
  return acc.finish();
}

Matrix standardize(const Matrix& values, const NormStats& stats) {
  if (values.cols != stats.mean.size()) {
    throw ShapeError("standardize: width " + std::to_string(values.cols) +
                     " vs stats width " + std::to_string(stats.mean.size()));
  }
  Matrix out = values;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(r, c) = (out(r, c) - stats.mean[c]) / stats.std[c];
    }
  }
  return out;
}

Matrix destandardize(const Matrix& values, const NormStats& stats) {
  if (values.cols != stats.mean.size()) {
    throw ShapeError("destandardize: width " + std::to_string(values.cols) +
                     " vs stats width " + std::to_string(stats.mean.size()));
  }
  Matrix out = values;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(r, c) = out(r, c) * stats.std[c] + stats.mean[c];
    }
  }
  return out;
}

ModalityBatch standardize(const ModalityBatch& batch,
                          const std::vector<NormStats>& stats) {
  if (stats.size() != batch.modality_count()) {
    throw ShapeError("standardize: stats for " + std::to_string(stats.size()) +
                     " modalities, batch has " +
                     std::to_string(batch.modality_count()));
  }
  ModalityBatch out = batch;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    out.latents[i] = standardize(batch.latents[i], stats[i]);
  }
  return out;
}

}  // namespace flowbind
