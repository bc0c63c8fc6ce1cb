#include "flowbind/analysis/cknna.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowbind/numcore/rng.hpp"

namespace flowbind {

std::vector<std::size_t> cknna_subsample(std::size_t n, std::size_t max_rows,
                                         std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= max_rows) return idx;
  Rng rng = Rng(seed).split(n);
  for (std::size_t i = 0; i < max_rows; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

/// Linear kernel of mean-centered rows scaled to unit mean squared row norm.
Matrix centered_kernel(const Matrix& x) {
  const std::size_t n = x.rows, d = x.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::isfinite(x(r, c))) throw NumericError("cknna: non-finite representation");
      mean[c] += x(r, c);
    }
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  double sq = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      centered(r, c) = x(r, c) - mean[c];
      sq += centered(r, c) * centered(r, c);
    }
  }
  if (sq == 0.0) throw NumericError("cknna: constant representation has zero alignment");
  const double inv = 1.0 / std::sqrt(sq / static_cast<double>(n));
  for (double& v : centered.values) v *= inv;
  Matrix kernel(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += centered(i, c) * centered(j, c);
      kernel(i, j) = s;
      kernel(j, i) = s;
    }
  }
  return kernel;
}

Matrix neighbour_mask(const Matrix& kernel, std::size_t k) {
  Matrix mask(kernel.rows, kernel.cols, 0.0);
  const auto top = kernel_top_k(kernel, k);
  for (std::size_t i = 0; i < top.size(); ++i) {
    for (std::size_t j : top[i]) mask(i, j) = 1.0;
  }
  return mask;
}

/// Double-centers A = mask .* K in place: A_ij - row_i - col_j + all.
Matrix double_center(const Matrix& kernel, const Matrix& mask) {
  const std::size_t n = kernel.rows;
  Matrix a(n, n);
  for (std::size_t j = 0; j < n * n; ++j) a.values[j] = mask.values[j] * kernel.values[j];
  std::vector<double> row(n, 0.0), col(n, 0.0);
  double all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row[i] += a(i, j);
      col[j] += a(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) all += row[i];
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = a(i, j) - row[i] * inv - col[j] * inv + all * inv * inv;
    }
  }
  return a;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) s += a.values[j] * b.values[j];
  return s;
}

}  // namespace

std::vector<std::vector<std::size_t>> kernel_top_k(const Matrix& kernel, std::size_t k) {
  const std::size_t n = kernel.rows;
  if (k == 0 || k >= n) {
    throw ArgumentError("cknna: need 1 <= k < n, got k=" + std::to_string(k) +
                        " with n=" + std::to_string(n));
  }
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.push_back(j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double ka = kernel(i, a), kb = kernel(i, b);
                        return ka > kb || (ka == kb && a < b);
                      });
    out[i].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

double cknna(const Matrix& x, const Matrix& y, std::size_t k, std::uint64_t seed,
             std::size_t max_rows) {
  if (x.rows != y.rows) {
    throw ShapeError("cknna: paired sets have " + std::to_string(x.rows) + " and " +
                     std::to_string(y.rows) + " rows");
  }
  const auto rows = cknna_subsample(x.rows, max_rows, seed);
  if (k == 0 || k >= rows.size()) {
    throw ArgumentError("cknna: need 1 <= k < n, got k=" + std::to_string(k) +
                        " with n=" + std::to_string(rows.size()));
  }
  const Matrix kx = centered_kernel(x.select_rows(rows));
  const Matrix ky = centered_kernel(y.select_rows(rows));
  const Matrix mx = neighbour_mask(kx, k);
  const Matrix my = neighbour_mask(ky, k);
  Matrix mutual = mx;
  for (std::size_t j = 0; j < mutual.values.size(); ++j) mutual.values[j] *= my.values[j];

  const double xy = frobenius_inner(double_center(kx, mutual), double_center(ky, mutual));
  const Matrix cx = double_center(kx, mx);
  const Matrix cy = double_center(ky, my);
  const double xx = frobenius_inner(cx, cx);
  const double yy = frobenius_inner(cy, cy);
  if (!(xx > 0.0) || !(yy > 0.0)) {
    throw NumericError("cknna: zero masked self-alignment");
  }
  return xy / std::sqrt(xx * yy);
}

}  // namespace flowbind
