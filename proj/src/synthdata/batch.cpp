#include "flowbind/synthdata/batch.hpp"

#include <cmath>
#include <limits>

namespace flowbind {

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

std::size_t draw_component(const GaussianMixture& mix, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < mix.weights.size(); ++k) {
    acc += mix.weights[k];
    if (u < acc) return k;
  }
  return mix.weights.size() - 1;
}

ModalityBatch sample_impl(const WorldSpec& world, const PairingSpec* pairing,
                          std::size_t rows, Rng& rng, bool keep_hidden) {
  const std::size_t n_mod = world.modality_count();
  ModalityBatch batch;
  batch.rows = rows;
  batch.present.assign(n_mod, std::vector<bool>(rows, false));
  for (const auto& v : world.views) batch.latents.emplace_back(rows, v.dim(), kAbsent);
  Matrix hidden(rows, world.hidden_dim);

  std::vector<double> pre;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& mean = world.mixture.means[draw_component(world.mixture, rng)];
    auto w = hidden.row(r);
    for (std::size_t k = 0; k < world.hidden_dim; ++k) {
      w[k] = mean[k] + world.mixture.std * rng.normal();
    }
    const ModalitySubset subset =
        pairing ? pairing->draw(rng) : ~ModalitySubset{0};
    for (std::size_t i = 0; i < n_mod; ++i) {
      const auto& view = world.views[i];
      const bool present = (subset >> i) & 1u;
      batch.present[i][r] = present;
      auto out = batch.latents[i].row(r);
      for (std::size_t j = 0; j < view.dim(); ++j) {
        double acc = view.offset[j];
        for (std::size_t k = 0; k < world.hidden_dim; ++k) {
          acc += view.map(j, k) * w[k];
        }
        if (view.nonlinearity == Nonlinearity::tanh) acc = std::tanh(acc);
        const double eps = rng.normal();
        if (present) out[j] = acc + view.noise * eps;
      }
    }
  }
  if (keep_hidden) batch.hidden = std::move(hidden);
  return batch;
}

}  // namespace

std::vector<std::size_t> ModalityBatch::present_rows(std::size_t modality) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < rows; ++r) {
    if (present[modality][r]) out.push_back(r);
  }
  return out;
}

std::size_t ModalityBatch::present_count(std::size_t row) const {
  std::size_t n = 0;
  for (const auto& p : present) n += p[row] ? 1 : 0;
  return n;
}

Tensor ModalityBatch::gather(std::size_t modality) const {
  const auto rows_i = present_rows(modality);
  return latents[modality].select_rows(rows_i).to_tensor();
}

ModalityBatch ModalityBatch::select_rows(const std::vector<std::size_t>& idx) const {
  ModalityBatch out;
  out.rows = idx.size();
  for (std::size_t i = 0; i < latents.size(); ++i) {
    out.latents.push_back(latents[i].select_rows(idx));
    std::vector<bool> p(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) p[r] = present[i][idx[r]];
    out.present.push_back(std::move(p));
  }
  if (hidden) out.hidden = hidden->select_rows(idx);
  return out;
}

void ModalityBatch::validate() const {
  if (present.size() != latents.size()) {
    throw ShapeError("batch presence mask does not match modality count");
  }
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (latents[i].rows != rows || present[i].size() != rows) {
      throw ShapeError("batch modality " + std::to_string(i) + " has wrong row count");
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (present_count(r) == 0) {
      throw ArgumentError("batch row " + std::to_string(r) + " has no present modality");
    }
  }
}

ModalityBatch sample_batch(const WorldSpec& world, const PairingSpec& pairing,
                           std::size_t rows, Rng& rng, bool keep_hidden) {
  if (rows == 0) throw ArgumentError("sample_batch: row count must be >= 1");
  return sample_impl(world, &pairing, rows, rng, keep_hidden);
}

ModalityBatch sample_paired(const WorldSpec& world, std::size_t rows, Rng& rng) {
  if (rows == 0) throw ArgumentError("sample_paired: row count must be >= 1");
  return sample_impl(world, nullptr, rows, rng, true);
}

}  // namespace flowbind
