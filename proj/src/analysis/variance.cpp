#include "flowbind/analysis/variance.hpp"

#include <algorithm>
#include <numeric>

#include "flowbind/networks/aux_encoder.hpp"

namespace flowbind {

double total_variance(const Matrix& values) {
  if (values.rows == 0) throw ArgumentError("variance of an empty set");
  const double n = static_cast<double>(values.rows);
  double total = 0.0;
  for (std::size_t c = 0; c < values.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < values.rows; ++r) mean += values(r, c);
    mean /= n;
    double sq = 0.0;
    for (std::size_t r = 0; r < values.rows; ++r) {
      const double d = values(r, c) - mean;
      sq += d * d;
    }
    total += sq / n;
  }
  return total;
}

double explained_variance_fraction(const Matrix& shared, const Matrix& target,
                                   std::size_t k_nn) {
  const std::size_t n = shared.rows;
  if (target.rows != n) throw ShapeError("explained_variance: row counts differ");
  if (k_nn == 0 || n <= k_nn) {
    throw ArgumentError("explained_variance: need more than k_nn=" + std::to_string(k_nn) +
                        " samples, got " + std::to_string(n));
  }
  const double denom = total_variance(target);
  if (!(denom > 0.0)) throw NumericError("explained_variance: target has zero variance");

  Matrix estimate(n, target.cols, 0.0);
  std::vector<double> dist(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < shared.cols; ++c) {
        const double d = shared(i, c) - shared(j, c);
        s += d * d;
      }
      dist[j] = s;
    }
    std::iota(order.begin(), order.end(), 0);
    std::swap(order[i], order[n - 1]);  // self excluded
    const auto by_distance = [&](std::size_t a, std::size_t b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_nn - 1),
                     order.end() - 1, by_distance);
    for (std::size_t m = 0; m < k_nn; ++m) {
      for (std::size_t c = 0; c < target.cols; ++c) estimate(i, c) += target(order[m], c);
    }
    for (std::size_t c = 0; c < target.cols; ++c) {
      estimate(i, c) /= static_cast<double>(k_nn);
    }
  }
  const double fraction = total_variance(estimate) / denom;
  return std::clamp(fraction, 0.0, 1.0);
}

double explained_variance(const FlowBindModel& model, const ModalityBatch& batch,
                          std::size_t modality, std::size_t k_nn) {
  if (modality >= model.modality_count()) {
    throw ArgumentError("explained_variance: modality index out of range");
  }
  const auto rows = batch.present_rows(modality);
  if (rows.size() < kVarianceMinSamples) {
    throw ArgumentError("explained_variance: need at least " +
                        std::to_string(kVarianceMinSamples) + " rows with the modality");
  }
  const ModalityBatch sub = batch.select_rows(rows);
  NoGradGuard guard;
  Rng unused(0);
  const Tensor z_star = encode_shared(model.encoder(), sub, unused, false);
  return explained_variance_fraction(Matrix::from_tensor(z_star), sub.latents[modality], k_nn);
}

}  // namespace flowbind
