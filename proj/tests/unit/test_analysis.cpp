#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowbind/analysis/ablation.hpp"
#include "flowbind/analysis/alignment.hpp"
#include "flowbind/analysis/cknna.hpp"
#include "flowbind/analysis/variance.hpp"
#include "flowbind/trainer/trainer.hpp"

using namespace flowbind;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values) v = rng.normal();
  return m;
}

Matrix product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
Matrix orthogonal(std::size_t d, Rng& rng) {
  Matrix q = gaussian(d, d, rng);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += q(i, j) * q(i, p);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, p);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= std::sqrt(norm);
  }
  return q;
}

// Reference CKNNA with explicit centering matrices and full sorts.
double naive_cknna(const Matrix& x, const Matrix& y, std::size_t k) {
  const std::size_t n = x.rows;
  const auto gram = [&](const Matrix& m) {
    Matrix c = m;
    for (std::size_t j = 0; j < m.cols; ++j) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += m(i, j);
      for (std::size_t i = 0; i < n; ++i) c(i, j) -= mu / n;
    }
    return product(c, transpose(c));
  };
  const auto knn = [&](const Matrix& kmat) {
    Matrix mask(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) idx.push_back(j);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return kmat(i, a) > kmat(i, b); });
      for (std::size_t m = 0; m < k; ++m) mask(i, idx[m]) = 1.0;
    }
    return mask;
  };
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / n;
  const auto hsic = [&](const Matrix& a, const Matrix& b) {
    const Matrix ha = product(product(h, a), h);
    const Matrix hb = product(product(h, b), h);
    double s = 0.0;
    for (std::size_t j = 0; j < n * n; ++j) s += ha.values[j] * hb.values[j];
    return s;
  };
  const auto masked = [&](const Matrix& kmat, const Matrix& mask) {
    Matrix out = kmat;
    for (std::size_t j = 0; j < n * n; ++j) out.values[j] *= mask.values[j];
    return out;
  };
  const Matrix kx = gram(x), ky = gram(y);
  const Matrix mx = knn(kx), my = knn(ky);
  Matrix both = mx;
  for (std::size_t j = 0; j < n * n; ++j) both.values[j] *= my.values[j];
  return hsic(masked(kx, both), masked(ky, both)) /
         std::sqrt(hsic(masked(kx, mx), masked(kx, mx)) * hsic(masked(ky, my), masked(ky, my)));
}

ModelConfig small_model() {
  ModelConfig c;
  c.latent_dim = 4;
  c.blocks = 1;
  c.hidden_mult = 2;
  c.time_dim = 8;
  c.encoder_hidden = 8;
  return c;
}

}  // namespace

TEST_CASE("cknna matches the explicit reference") {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 20 + rng.below(20);
    const Matrix x = gaussian(n, 3, rng);
    Matrix y = gaussian(n, 4, rng);
    for (std::size_t i = 0; i < n; ++i) y(i, 0) += 2.0 * x(i, 0);
    const std::size_t k = 1 + rng.below(8);
    CHECK(std::abs(cknna(x, y, k) - naive_cknna(x, y, k)) < 1e-10);
  }
}

TEST_CASE("cknna examples") {
  Rng rng(2);
  const Matrix x = gaussian(200, 5, rng);
  CHECK(std::abs(cknna(x, x) - 1.0) < 1e-9);
  const Matrix rotated = product(x, orthogonal(5, rng));
  CHECK(std::abs(cknna(x, rotated) - 1.0) < 1e-6);

  const Matrix a = gaussian(512, 8, rng), b = gaussian(512, 8, rng);
  CHECK(std::abs(cknna(a, b, 10)) < 0.1);

  const Matrix y = gaussian(200, 3, rng);
  CHECK(cknna(x, y, 7) == cknna(y, x, 7));
  Matrix scaled = x;
  for (double& v : scaled.values) v *= 37.5;
  CHECK(std::abs(cknna(scaled, y) - cknna(x, y)) < 1e-9);
}

TEST_CASE("cknna errors") {
  Rng rng(3);
  const Matrix x = gaussian(10, 2, rng);
  CHECK_THROWS_AS(cknna(x, x, 10), ArgumentError);
  CHECK_THROWS_AS(cknna(x, x, 0), ArgumentError);
  CHECK_THROWS_AS(cknna(x, gaussian(9, 2, rng), 3), ShapeError);
  CHECK_THROWS_AS(cknna(Matrix(10, 2, 1.0), x, 3), NumericError);
}

TEST_CASE("kernel top-k breaks ties by lower index") {
  const Matrix k(4, 4, {9, 1, 1, 1,  //
                        1, 9, 2, 2,  //
                        0, 5, 9, 5,  //
                        3, 3, 3, 9});
  const auto top = kernel_top_k(k, 2);
  CHECK(top[0] == std::vector<std::size_t>{1, 2});
  CHECK(top[1] == std::vector<std::size_t>{2, 3});
  CHECK(top[2] == std::vector<std::size_t>{1, 3});
  CHECK(top[3] == std::vector<std::size_t>{0, 1});
}

TEST_CASE("cknna subsample is a pure function of n and seed") {
  const auto a = cknna_subsample(5000, 1024, 7);
  CHECK(a == cknna_subsample(5000, 1024, 7));
  CHECK(a != cknna_subsample(5000, 1024, 8));
  CHECK(a.size() == 1024);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a.back() < 5000);
  const auto all = cknna_subsample(50, 1024, 7);
  CHECK(all.size() == 50);
  CHECK(all[49] == 49);
}

TEST_CASE("explained variance examples") {
  Rng rng(4);
  const std::size_t n = 4096;
  const Matrix z = gaussian(n, 2, rng);

  Matrix smooth(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    smooth(i, 0) = std::tanh(z(i, 0) + 0.5 * z(i, 1));
    smooth(i, 1) = std::sin(z(i, 1)) + 0.3 * z(i, 0);
  }
  CHECK(explained_variance_fraction(z, smooth) >= 0.95);

  CHECK(explained_variance_fraction(z, gaussian(n, 2, rng)) <= 0.1);

  Matrix noisy = z;
  for (double& v : noisy.values) v += rng.normal();
  const double half = explained_variance_fraction(z, noisy);
  CHECK(half >= 0.4);
  CHECK(half <= 0.6);

  CHECK_THROWS_AS(explained_variance_fraction(gaussian(32, 2, rng), gaussian(32, 2, rng)),
                  ArgumentError);
  CHECK_THROWS(explained_variance_fraction(z, Matrix(n, 1, 3.0)));
  CHECK(total_variance(Matrix(2, 2, {-1, 0, 1, 2})) == 2.0);
}

TEST_CASE("property: explained variance stays in [0, 1]") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 40 + rng.below(60);
    const std::size_t k = 1 + rng.below(20);
    Matrix shared = gaussian(n, 1 + rng.below(3), rng);
    Matrix target = gaussian(n, 1 + rng.below(3), rng);
    if (trial % 3 == 0) {
      // Duplicate rows make exact distance ties.
      for (std::size_t i = 1; i < n; i += 2)
        for (std::size_t c = 0; c < shared.cols; ++c) shared(i, c) = shared(i - 1, c);
    }
    const double f = explained_variance_fraction(shared, target, k);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("alignment with zero drifts is the identity flow") {
  const WorldSpec w = default_world();
  ModelConfig cfg = small_model();
  cfg.zero_drift_head = true;
  const FlowBindModel m = make_model(w, cfg, 1);
  Rng rng(6);
  const auto stats = compute_norm_stats(w, 512, rng);
  const ModalityBatch eval = standardize(sample_paired(w, 300, rng), stats);
  const auto report = alignment_report(m, eval, all_pairs(3), SolverSpec{}, EvalSettings{}, 3);
  REQUIRE(report.size() == 3);
  for (const auto& p : report) {
    CHECK(p.shared == p.raw);
    CHECK(std::abs(p.shuffled) < 0.1);
  }
  CHECK(all_pairs(3)[2] == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("explained variance through the model encoder") {
  const WorldSpec w = default_world();
  const FlowBindModel m = make_model(w, small_model(), 2);
  Rng rng(7);
  const auto stats = compute_norm_stats(w, 512, rng);
  const ModalityBatch eval = standardize(sample_paired(w, 600, rng), stats);
  // A fresh encoder outputs the constant zero; every distance ties, so only
  // the lowest-index rows see a different neighbour set.
  CHECK(explained_variance(m, eval, 0) < 0.01);
  CHECK_THROWS(explained_variance(m, eval.select_rows({0, 1, 2}), 0));
  CHECK_THROWS(explained_variance(m, eval, 5));
}

TEST_CASE("ablation arms coincide without training") {
  const WorldSpec w = default_world();
  TrainConfig train;
  train.steps = 0;
  train.stats_samples = 256;
  EvalSettings settings;
  settings.samples = 600;
  AblationSpec spec;
  spec.excluded = {parse_subset("I+A", w)};
  ModelConfig cfg = small_model();
  cfg.zero_drift_head = true;
  const AblationResult r =
      run_ablation(spec, w, default_pairing(w), cfg, train, SolverSpec{}, settings);
  CHECK(r.learnable.explained_variance == r.fixed.explained_variance);
  CHECK(r.learnable.cknna == r.fixed.cknna);
  CHECK(r.learnable.rmse == r.fixed.rmse);

  ModelConfig narrow = cfg;
  narrow.latent_dim = 1;
  spec.anchor = 0;
  CHECK_THROWS(run_ablation(spec, w, default_pairing(w), narrow, train, SolverSpec{}, settings));
}
