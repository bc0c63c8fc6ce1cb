#include <doctest.h>

#include <cmath>
#include <map>

#include "flowbind/trainer/decomposition.hpp"
#include "flowbind/trainer/trainer.hpp"
#include "support.hpp"

using namespace flowbind;
using namespace flowbind::testing;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.latent_dim = 4;
  c.blocks = 1;
  c.hidden_mult = 2;
  c.time_dim = 8;
  c.encoder_hidden = 8;
  return c;
}

FlowBindModel scalar_model(double head_bias) {
  ModelConfig c;
  c.latent_dim = 1;
  c.blocks = 1;
  c.hidden_mult = 1;
  c.time_dim = 2;
  c.encoder_hidden = 2;
  c.zero_drift_head = true;
  FlowBindModel m({{"X", 1}}, c, Rng(1));
  m.drift(0).head().bias.mutable_data()[0] = head_bias;
  return m;
}

ModalityBatch paired_batch(std::vector<Matrix> latents) {
  ModalityBatch b;
  b.rows = latents.front().rows;
  for (auto& m : latents) b.present.emplace_back(b.rows, true);
  b.latents = std::move(latents);
  return b;
}

ModalityBatch standardized_world_batch(std::size_t rows, Rng& rng) {
  const WorldSpec w = default_world();
  Rng stats_rng(77);
  const auto stats = compute_norm_stats(w, 512, stats_rng);
  return standardize(sample_batch(w, default_pairing(w), rows, rng), stats);
}

std::vector<std::vector<double>> encoder_grads(const FlowBindModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.encoder_parameters()) {
    out.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
  }
  return out;
}

void zero_all(const FlowBindModel& m) {
  for (auto p : m.parameters()) p.tensor.zero_grad();
}

// Loss and backward for a fixed z*-producing encoder pass under the policy.
void policy_backward(const FlowBindModel& m, const ModalityBatch& b, std::vector<double> t,
                     bool detach_target = true) {
  Rng unused(0);
  const Tensor tt = Tensor::vector(std::move(t));
  const Tensor z = encode_shared(m.encoder(), b, unused, false);
  backward(fm_loss_terms(m, b, apply_gradient_policy(tt, z, detach_target), tt).loss);
}

}  // namespace

TEST_CASE("time sampler mixture frequencies") {
  const TimeSampler s;
  s.validate();
  Rng rng(1);
  const std::size_t n = 100000;
  std::size_t zeros = 0, ones = 0;
  double interior = 0.0;
  std::size_t interior_n = 0;
  for (double t : s.draw(n, rng)) {
    REQUIRE(t >= 0.0);
    REQUIRE(t <= 1.0);
    if (t == 0.0) {
      ++zeros;
    } else if (t == 1.0) {
      ++ones;
    } else {
      interior += t;
      ++interior_n;
    }
  }
  const auto within = [&](std::size_t count, double p) {
    const double sd = std::sqrt(n * p * (1.0 - p));
    return std::abs(static_cast<double>(count) - n * p) < 4.0 * sd;
  };
  CHECK(within(zeros, 0.15));
  CHECK(within(ones, 0.85 * 0.3));
  CHECK(std::abs(interior / interior_n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / interior_n));

  CHECK_THROWS_AS((TimeSampler{1.0, 0.3}.validate()), ArgumentError);
  CHECK_THROWS_AS((TimeSampler{0.1, 1.0}.validate()), ArgumentError);
  CHECK_THROWS_AS((TimeSampler{-0.1, 0.3}.validate()), ArgumentError);
  CHECK_NOTHROW((TimeSampler{0.0, 0.0}.validate()));
}

TEST_CASE("interpolate examples") {
  const Tensor zs = Tensor::matrix(1, 2, {0, 0});
  const Tensor zi = Tensor::matrix(1, 2, {2, 4});
  const Tensor mid = interpolate(zs, zi, Tensor::vector({0.5}));
  CHECK(mid.at(0) == 1.0);
  CHECK(mid.at(1) == 2.0);
  Rng rng(2);
  const Tensor a = random_tensor({3, 2}, rng, false), b = random_tensor({3, 2}, rng, false);
  const Tensor at0 = interpolate(a, b, Tensor::vector({0, 0, 0}));
  const Tensor at1 = interpolate(a, b, Tensor::vector({1, 1, 1}));
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(at0.at(k) == a.at(k));
    CHECK(at1.at(k) == b.at(k));
  }
  CHECK_THROWS_AS(interpolate(a, Tensor::zeros({3, 3}), Tensor::vector({0, 0, 0})), ShapeError);
  CHECK_THROWS(interpolate(a, b, Tensor::vector({0, 2, 0})));
}

TEST_CASE("fm_loss examples") {
  SUBCASE("scalar residual") {
    const FlowBindModel m = scalar_model(1.0);
    const ModalityBatch b = paired_batch({Matrix(1, 1, 3.0)});
    const Tensor loss = fm_loss(m, b, Tensor::zeros({1, 1}), Tensor::vector({0.4}));
    CHECK(loss.item() == 4.0);
  }
  SUBCASE("perfect fit") {
    const FlowBindModel m = scalar_model(2.0);
    const ModalityBatch b = paired_batch({Matrix(3, 1, {1.5, 1.5, 1.5})});
    const Tensor loss = fm_loss(m, b, Tensor::full({3, 1}, -0.5), Tensor::vector({0.0, 0.5, 1.0}));
    CHECK(loss.item() == 0.0);
  }
  SUBCASE("absent entries are never read and the mean runs over present terms") {
    FlowBindModel m = scalar_model(0.0);
    ModalityBatch b = paired_batch({Matrix(2, 1, {2.0, NAN})});
    b.present[0] = {true, false};
    const FmLoss l = fm_loss_terms(m, b, {Tensor::zeros({2, 1}), Tensor::zeros({2, 1})},
                                   Tensor::vector({0.3, 0.3}));
    CHECK(l.terms == 1);
    CHECK(l.loss.item() == 4.0);
  }
  SUBCASE("no present modality") {
    const FlowBindModel m = scalar_model(0.0);
    ModalityBatch b = paired_batch({Matrix(1, 1, NAN)});
    b.present[0] = {false};
    CHECK_THROWS(fm_loss(m, b, Tensor::zeros({1, 1}), Tensor::vector({0.3})));
  }
}

TEST_CASE("zero drift at t=0 gives the enumerated mean squared gap") {
  // Uniform joint over 6 atoms, so the batch mean is the expectation.
  Rng rng(3);
  ModelConfig cfg = small_model();
  cfg.zero_drift_head = true;
  const FlowBindModel m({{"A", 2}, {"B", 3}}, cfg, Rng(2));
  const std::size_t n = 6;
  Matrix zs(n, 4), a(n, 2), b(n, 3);
  for (double& v : zs.values) v = rng.normal();
  for (double& v : a.values) v = rng.normal();
  for (double& v : b.values) v = rng.normal();
  double expected = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double da = (c < 2 ? a(r, c) : 0.0) - zs(r, c);
      const double db = (c < 3 ? b(r, c) : 0.0) - zs(r, c);
      expected += (da * da + db * db) / n;
    }
  }
  const Tensor loss =
      fm_loss(m, paired_batch({a, b}), zs.to_tensor(), Tensor::zeros({n}));
  // Mean over M = 2n terms is the per-modality sum halved.
  CHECK(std::abs(2.0 * loss.item() - expected) < 1e-9);
}

TEST_CASE("gradient policy: encoder gradients come from t=0 rows only") {
  Rng rng(4);
  FlowBindModel m = make_model(default_world(), small_model(), 5);
  randomize(m.parameters(), rng, 0.4);
  const ModalityBatch b = standardized_world_batch(12, rng);

  SUBCASE("all rows at t=0 move the encoder") {
    policy_backward(m, b, std::vector<double>(12, 0.0));
    double norm = 0.0;
    for (const auto& g : encoder_grads(m))
      for (double v : g) norm += v * v;
    CHECK(norm > 0.0);
  }
  SUBCASE("all rows interior leave the encoder exactly untouched") {
    policy_backward(m, b, std::vector<double>(12, 0.5));
    for (const auto& g : encoder_grads(m))
      for (double v : g) CHECK(v == 0.0);
  }
  SUBCASE("interpolant-only detach lets the target carry gradient") {
    policy_backward(m, b, std::vector<double>(12, 0.5), false);
    double norm = 0.0;
    for (const auto& g : encoder_grads(m))
      for (double v : g) norm += v * v;
    CHECK(norm > 0.0);
  }
  SUBCASE("mixed batch equals its t=0 sub-batch") {
    std::vector<double> t(12);
    std::vector<std::size_t> zero_rows;
    for (std::size_t r = 0; r < 12; ++r) {
      t[r] = r % 3 == 0 ? 0.0 : (r % 3 == 1 ? 1.0 : 0.3 + 0.05 * r);
      if (t[r] == 0.0) zero_rows.push_back(r);
    }
    std::size_t m_full = 0, m_sub = 0;
    for (std::size_t r = 0; r < 12; ++r) {
      m_full += b.present_count(r);
      if (t[r] == 0.0) m_sub += b.present_count(r);
    }
    policy_backward(m, b, t);
    const auto full = encoder_grads(m);
    zero_all(m);
    policy_backward(m, b.select_rows(zero_rows), std::vector<double>(zero_rows.size(), 0.0));
    const auto sub = encoder_grads(m);
    // Each loss is a mean over its own term count; compare the sums.
    double worst = 0.0;
    for (std::size_t p = 0; p < full.size(); ++p)
      for (std::size_t k = 0; k < full[p].size(); ++k)
        worst = std::max(worst, std::abs(full[p][k] * m_full - sub[p][k] * m_sub));
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("fm_loss gradients match finite differences with z* held fixed") {
  Rng rng(6);
  FlowBindModel m = make_model(default_world(), small_model(), 7);
  randomize(m.parameters(), rng, 0.4);
  const ModalityBatch b = standardized_world_batch(5, rng);
  Tensor z = random_tensor({5, 4}, rng, true);
  const Tensor t = Tensor::vector({0.0, 0.2, 0.5, 1.0, 0.9});
  backward(fm_loss(m, b, z, t));
  const auto f = [&] {
    NoGradGuard g;
    return fm_loss_terms(m, b, {z, z}, t).loss.item();
  };
  auto params = m.drift_parameters();
  for (auto& p : params) {
    for (std::size_t j = 0; j < p.tensor.numel(); j += 5) {
      INFO(p.name);
      CHECK(grad_close(p.tensor.grad()[j], central_difference(f, p.tensor, j)));
    }
  }
  // Only the t=0 row of z* carries a gradient under the policy.
  for (std::size_t r = 1; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(z.grad()[r * 4 + c] == 0.0);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(grad_close(z.grad()[c], central_difference(f, z, c)));
  }
}

TEST_CASE("train_step with zero learning rate leaves parameters bit-identical") {
  Rng rng(8);
  FlowBindModel m = make_model(default_world(), small_model(), 1);
  const FlowBindModel before = m.clone();
  TrainConfig cfg;
  cfg.adam.lr = 0.0;
  Trainer trainer(m, cfg);
  const StepStats s = trainer.train_step(standardized_world_batch(16, rng));
  CHECK(std::isfinite(s.loss));
  CHECK(s.step == 1);
  const auto pa = m.parameters(), pb = before.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(std::equal(pa[k].tensor.data().begin(), pa[k].tensor.data().end(),
                     pb[k].tensor.data().begin()));
  }
}

TEST_CASE("training is deterministic in the seed") {
  const WorldSpec w = default_world();
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.batch_size = 32;
  cfg.seed = 11;
  Rng sa(3), sb(3);
  const auto stats = compute_norm_stats(w, 512, sa);
  CHECK(stats == compute_norm_stats(w, 512, sb));
  FlowBindModel a = make_model(w, small_model(), cfg.seed);
  FlowBindModel b = make_model(w, small_model(), cfg.seed);
  const auto la = run_training(a, w, default_pairing(w), stats, cfg);
  const auto lb = run_training(b, w, default_pairing(w), stats, cfg);
  REQUIRE(la.size() == 100);
  for (std::size_t k = 0; k < la.size(); ++k) {
    CHECK(la[k].loss == lb[k].loss);
    CHECK(la[k].grad_norm == lb[k].grad_norm);
  }
  cfg.seed = 12;
  FlowBindModel c = make_model(w, small_model(), cfg.seed);
  const auto lc = run_training(c, w, default_pairing(w), stats, cfg);
  CHECK(lc[5].loss != la[5].loss);
}

TEST_CASE("frozen and fixed-anchor training leave the encoder untouched") {
  const WorldSpec w = default_world();
  Rng sr(3);
  const auto stats = compute_norm_stats(w, 512, sr);
  for (int mode = 0; mode < 2; ++mode) {
    TrainConfig cfg;
    cfg.steps = 5;
    cfg.batch_size = 16;
    if (mode == 0) {
      cfg.freeze_encoder = true;
    } else {
      cfg.anchor = AnchorMode::fixed;
    }
    FlowBindModel m = make_model(w, small_model(), 2);
    const FlowBindModel before = m.clone();
    run_training(m, w, default_pairing(w), stats, cfg);
    const auto pa = m.encoder_parameters(), pb = before.encoder_parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) {
      CHECK(std::equal(pa[k].tensor.data().begin(), pa[k].tensor.data().end(),
                       pb[k].tensor.data().begin()));
    }
  }
  TrainConfig fixed;
  fixed.anchor = AnchorMode::fixed;
  const PairingSpec p = effective_pairing(default_pairing(w), fixed);
  for (const auto& e : p.entries) CHECK((e.subset & 1u) != 0);
}

TEST_CASE("non-finite training aborts with diagnostics") {
  Rng rng(9);
  FlowBindModel m = make_model(default_world(), small_model(), 1);
  for (double& v : m.drift(0).head().weight.mutable_data()) v = 1e300;
  Trainer trainer(m, TrainConfig{});
  try {
    trainer.train_step(standardized_world_batch(16, rng));
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.diagnostics().find("step") != std::string::npos);
    CHECK(e.diagnostics().find("t histogram") != std::string::npos);
  }
}

TEST_CASE("decomposition examples") {
  DiscreteJoint coin;
  for (double z : {0.0, 1.0})
    for (double eps : {-1.0, 1.0}) coin.outcomes.push_back({0.25, {z}, {{z + eps}}});

  SUBCASE("zero drift on the coin joint") {
    const DecompositionReport r =
        t0_decomposition(coin, [](std::size_t, std::span<const double> z) {
          return std::vector<double>(z.size(), 0.0);
        });
    CHECK(r.total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.unexplained == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(r.approx) < 1e-15);
  }
  SUBCASE("Bayes drift has no approximation error") {
    Rng rng(10);
    RandomJointSpec spec;
    spec.modality_dims = {2, 2};
    const DiscreteJoint j = random_joint(spec, rng);
    const DecompositionReport r = t0_decomposition(j, conditional_mean_drift(j));
    CHECK(std::abs(r.approx) < 1e-15);
    CHECK(std::abs(r.total - r.unexplained) <= 1e-12 * (1.0 + r.total));
  }
}

TEST_CASE("property: t=0 decomposition holds for arbitrary drifts") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    RandomJointSpec spec;
    spec.groups = 1 + rng.below(15);
    spec.outcomes_per_group = 1 + rng.below(6);
    spec.shared_dim = 1 + rng.below(3);
    spec.modality_dims.assign(1 + rng.below(3), spec.shared_dim);
    const DiscreteJoint j = random_joint(spec, rng);
    std::vector<double> w(spec.shared_dim * spec.shared_dim * spec.modality_dims.size());
    for (double& v : w) v = rng.normal();
    const T0Drift drift = [&](std::size_t i, std::span<const double> z) {
      std::vector<double> out(z.size());
      for (std::size_t a = 0; a < z.size(); ++a)
        for (std::size_t b = 0; b < z.size(); ++b)
          out[a] += std::sin(w[(i * z.size() + a) * z.size() + b] * z[b]);
      return out;
    };
    const DecompositionReport r = t0_decomposition(j, drift);
    // Independent oracle for the total: direct expectation over atoms.
    double total = 0.0;
    for (const auto& o : j.outcomes) {
      for (std::size_t i = 0; i < o.modalities.size(); ++i) {
        const auto v = drift(i, o.shared);
        for (std::size_t c = 0; c < v.size(); ++c) {
          const double e = v[c] - (o.modalities[i][c] - o.shared[c]);
          total += o.probability * e * e;
        }
      }
    }
    CHECK(std::abs(total - r.total) <= 1e-10 * (1.0 + total));
    CHECK(std::abs(r.gap()) <= kDecompositionTolerance * (1.0 + std::abs(r.total)));
  }
}

TEST_CASE("model decomposition at initialization on a 20-outcome joint") {
  Rng rng(12);
  const WorldSpec w = default_world();
  FlowBindModel m = make_model(w, small_model(), 3);
  randomize(m.parameters(), rng, 0.5);
  RandomJointSpec spec;
  spec.groups = 5;
  spec.outcomes_per_group = 4;
  spec.shared_dim = 2;
  spec.modality_dims = {2, 3, 2};
  const DiscreteJoint bound = bind_shared_latents(random_joint(spec, rng), m, 0);
  REQUIRE(bound.outcomes.size() == 20);
  const DecompositionReport r = t0_decomposition_report(m, bound);
  CHECK(std::abs(r.gap()) <= 1e-9);
  CHECK(r.per_modality.size() == 3);
  CHECK(r.approx > 0.0);
}
