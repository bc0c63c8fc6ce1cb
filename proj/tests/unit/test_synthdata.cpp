#include <doctest.h>

#include <cmath>

#include "flowbind/synthdata/batch.hpp"
#include "flowbind/synthdata/discrete.hpp"
#include "flowbind/synthdata/normalization.hpp"
#include "flowbind/synthdata/world.hpp"

using namespace flowbind;

namespace {

WorldSpec line_world(std::vector<double> means, std::vector<double> weights,
                     double std, std::size_t modalities) {
  WorldSpec w;
  w.hidden_dim = 1;
  for (double m : means) w.mixture.means.push_back({m});
  w.mixture.weights = std::move(weights);
  w.mixture.std = std;
  for (std::size_t i = 0; i < modalities; ++i) {
    ModalityView v;
    v.name = std::string(1, static_cast<char>('P' + i));
    v.map = Matrix(1, 1, 1.0);
    v.offset = {0.0};
    w.views.push_back(v);
  }
  return w;
}

ModalityBatch single_modality(std::size_t rows, std::size_t cols,
                              std::vector<double> values) {
  ModalityBatch b;
  b.rows = rows;
  b.latents.push_back(Matrix(rows, cols, std::move(values)));
  b.present.push_back(std::vector<bool>(rows, true));
  return b;
}

DiscreteJoint additive_coin_joint() {
  DiscreteJoint j;
  for (double z : {0.0, 1.0}) {
    for (double eps : {-1.0, 1.0}) {
      j.outcomes.push_back({0.25, {z}, {{z + eps}}});
    }
  }
  return j;
}

}  // namespace

TEST_CASE("default world is valid and matches the documented layout") {
  const WorldSpec w = default_world();
  w.validate();
  REQUIRE(w.modality_count() == 3);
  CHECK(w.views[0].name == "T");
  CHECK(w.views[0].dim() == 2);
  CHECK(w.views[0].invertible_class());
  CHECK(w.views[1].dim() == 3);
  CHECK(w.views[1].nonlinearity == Nonlinearity::tanh);
  CHECK(w.views[2].dim() == 2);
  for (const auto& v : w.views) CHECK(v.noise == 0.02);

  const PairingSpec p = default_pairing(w);
  p.validate(3);
  REQUIRE(p.entries.size() == 3);
  double total = 0.0;
  for (const auto& e : p.entries) {
    CHECK(subset_size(e.subset) == 2);
    total += e.probability;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.entries[0].probability == doctest::Approx(272.0 / 547.0).epsilon(1e-15));
}

TEST_CASE("world validation rejects rank-deficient invertible views") {
  WorldSpec w = line_world({0.0}, {1.0}, 1.0, 1);
  w.hidden_dim = 2;
  w.mixture.means = {{0.0, 0.0}};
  w.views[0].map = Matrix(2, 2, {1, 2, 2, 4});
  w.views[0].offset = {0, 0};
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w.views[0].map = Matrix(2, 2, {1, 2, 0, 4});
  CHECK_NOTHROW(w.validate());
  CHECK(matrix_rank(Matrix(2, 3, {1, 2, 3, 2, 4, 6})) == 1);
}

TEST_CASE("identity noiseless view reproduces the hidden variable") {
  const WorldSpec w = line_world({-1.0, 2.0}, {0.5, 0.5}, 0.7, 1);
  Rng rng(1);
  const ModalityBatch b = sample_paired(w, 200, rng);
  REQUIRE(b.hidden.has_value());
  CHECK(b.latents[0] == *b.hidden);
}

TEST_CASE("pairing presence fractions stay within a binomial band") {
  const WorldSpec w = line_world({0.0}, {1.0}, 1.0, 2);
  const PairingSpec p = PairingSpec::from_weights({{0b01, 1.0}, {0b10, 1.0}});
  Rng rng(2);
  const std::size_t n = 10000;
  const ModalityBatch b = sample_batch(w, p, n, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    const double frac = static_cast<double>(b.present_rows(i).size()) / n;
    CHECK(frac >= 0.47);
    CHECK(frac <= 0.53);
  }
  for (std::size_t r = 0; r < n; ++r) {
    CHECK(b.present_count(r) == 1);
    const std::size_t absent = b.is_present(0, r) ? 1 : 0;
    CHECK(std::isnan(b.latents[absent](r, 0)));
  }
  CHECK(b.gather(0).rows() + b.gather(1).rows() == n);
}

TEST_CASE("mixture mean matches the weighted component mean") {
  const WorldSpec w = line_world({-3.0, 3.0}, {0.25, 0.75}, 1e-3, 1);
  Rng rng(3);
  const ModalityBatch b = sample_paired(w, 10000, rng);
  double mean = 0.0;
  for (double v : b.hidden->values) mean += v;
  mean /= 10000.0;
  CHECK(std::abs(mean - 1.5) < 0.1);
}

TEST_CASE("sampling is deterministic in the rng stream") {
  const WorldSpec w = default_world();
  const PairingSpec p = default_pairing(w);
  Rng a(9), b(9);
  const ModalityBatch x = sample_batch(w, p, 64, a);
  const ModalityBatch y = sample_batch(w, p, 64, b);
  CHECK(x.present == y.present);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < x.latents[i].values.size(); ++k) {
      const double u = x.latents[i].values[k], v = y.latents[i].values[k];
      CHECK((u == v || (std::isnan(u) && std::isnan(v))));
    }
  }
}

TEST_CASE("pairing restriction and exclusion renormalize") {
  const WorldSpec w = default_world();
  const PairingSpec p = default_pairing(w);
  const PairingSpec t = p.restricted_to(0);
  REQUIRE(t.entries.size() == 2);
  CHECK(t.entries[0].probability == doctest::Approx(272.0 / 363.0));
  const PairingSpec x = p.without({parse_subset("I+A", w)});
  REQUIRE(x.entries.size() == 2);
  CHECK(x.entries[0].probability + x.entries[1].probability ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(subset_to_string(parse_subset("A+T", w), w) == "T+A");
  CHECK_THROWS_AS(parse_subset("T+X", w), ConfigError);
  CHECK_THROWS_AS(PairingSpec::from_weights({{0, 1.0}}).validate(3), ConfigError);
}

TEST_CASE("normalization examples") {
  SUBCASE("constant values floor the std") {
    const auto stats = normalization_stats({single_modality(3, 1, {4, 4, 4})});
    CHECK(stats[0].mean[0] == 4.0);
    CHECK(stats[0].std[0] == kStdFloor);
  }
  SUBCASE("symmetric pair") {
    const auto stats = normalization_stats({single_modality(2, 2, {-1, 1, 1, -1})});
    CHECK(stats[0].mean[0] == 0.0);
    CHECK(stats[0].std[0] == 1.0);
    CHECK(stats[0].std[1] == 1.0);
  }
  SUBCASE("modality never present") {
    ModalityBatch b = single_modality(2, 1, {NAN, NAN});
    b.present[0] = {false, false};
    CHECK_THROWS(normalization_stats({b}));
  }
}

TEST_CASE("standardizing then recomputing stats gives zero mean, unit std") {
  Rng rng(4);
  const WorldSpec w = default_world();
  std::vector<ModalityBatch> stream;
  for (int k = 0; k < 4; ++k) stream.push_back(sample_batch(w, default_pairing(w), 500, rng));
  const auto stats = normalization_stats(stream);
  std::vector<ModalityBatch> standardized;
  for (const auto& b : stream) standardized.push_back(standardize(b, stats));
  const auto again = normalization_stats(standardized);
  for (const auto& s : again) {
    for (double m : s.mean) CHECK(std::abs(m) < 1e-10);
    for (double d : s.std) CHECK(std::abs(d - 1.0) < 1e-10);
  }
  const Matrix round = destandardize(standardize(stream[0].latents[0], stats[0]), stats[0]);
  for (std::size_t k = 0; k < round.values.size(); ++k) {
    const double u = round.values[k], v = stream[0].latents[0].values[k];
    CHECK((std::isnan(v) ? std::isnan(u) : std::abs(u - v) < 1e-12));
  }
}

TEST_CASE("enumerate_conditionals on the additive coin joint") {
  const ConditionalMoments m = enumerate_conditionals(additive_coin_joint(), 0);
  REQUIRE(m.groups.size() == 2);
  for (const auto& g : m.groups) {
    CHECK(g.probability == 0.5);
    CHECK(g.mean[0] == g.shared[0]);
    CHECK(g.variance == 1.0);
  }
  CHECK(m.expected_variance == 1.0);
  CHECK(m.variance_of_mean == 0.25);
  CHECK(m.total_variance == 1.25);
}

TEST_CASE("deterministic modality has zero expected conditional variance") {
  DiscreteJoint j;
  for (double z : {-1.0, 0.5, 2.0}) j.outcomes.push_back({1.0 / 3.0, {z}, {{z * z, 3.0 * z}}});
  const ConditionalMoments m = enumerate_conditionals(j, 0);
  CHECK(m.expected_variance == 0.0);
}

TEST_CASE("property: law of total variance on random joints") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    RandomJointSpec spec;
    spec.groups = 1 + rng.below(12);
    spec.outcomes_per_group = 1 + rng.below(5);
    spec.shared_dim = 1 + rng.below(3);
    spec.modality_dims = {1 + rng.below(3), 1 + rng.below(3)};
    const DiscreteJoint j = random_joint(spec, rng);
    j.validate();
    for (std::size_t i = 0; i < 2; ++i) {
      const ConditionalMoments m = enumerate_conditionals(j, i);
      CHECK(std::abs(m.total_variance - m.expected_variance - m.variance_of_mean) < 1e-12);
      // Independent oracle: the total variance straight from the atoms.
      const std::size_t d = spec.modality_dims[i];
      std::vector<double> mu(d, 0.0);
      for (const auto& o : j.outcomes)
        for (std::size_t c = 0; c < d; ++c) mu[c] += o.probability * o.modalities[i][c];
      double var = 0.0;
      for (const auto& o : j.outcomes)
        for (std::size_t c = 0; c < d; ++c)
          var += o.probability * (o.modalities[i][c] - mu[c]) * (o.modalities[i][c] - mu[c]);
      CHECK(std::abs(var - m.total_variance) < 1e-12);
    }
  }
}

TEST_CASE("joint validation") {
  DiscreteJoint j = additive_coin_joint();
  j.outcomes[0].probability = 0.3;
  CHECK_THROWS(j.validate());
  KahanSum k;
  for (int i = 0; i < 10; ++i) k.add(0.1);
  CHECK(k.value() == doctest::Approx(1.0).epsilon(1e-16));
}
