#include <doctest.h>

#include <cmath>

#include "flowbind/flowrt/inference.hpp"
#include "flowbind/trainer/trainer.hpp"
#include "support.hpp"

using namespace flowbind;
using namespace flowbind::testing;

namespace {

SolverSpec solver(SolverMethod m, std::size_t n) { return SolverSpec{m, n}; }

double relative_error(const Tensor& a, const Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.numel(); ++k) {
    num += (a.at(k) - b.at(k)) * (a.at(k) - b.at(k));
    den += b.at(k) * b.at(k);
  }
  return std::sqrt(num / den);
}

ModelConfig small_model() {
  ModelConfig c;
  c.latent_dim = 4;
  c.blocks = 2;
  c.hidden_mult = 2;
  c.time_dim = 8;
  c.encoder_hidden = 8;
  return c;
}

std::vector<NormStats> unit_stats(const FlowBindModel& m) {
  std::vector<NormStats> out;
  for (const auto& info : m.modalities()) {
    out.push_back({std::vector<double>(info.dim, 0.0), std::vector<double>(info.dim, 1.0)});
  }
  return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("solver spec parsing and validation") {
  CHECK(parse_solver_method("euler") == SolverMethod::euler);
  CHECK(to_string(SolverMethod::heun) == "heun");
  CHECK_THROWS(parse_solver_method("rk4"));
  CHECK_THROWS(solver(SolverMethod::heun, 0).validate());
}

TEST_CASE("constant field integrates exactly") {
  const VelocityField c = [](const Tensor& z, double) {
    return Tensor::full(z.shape(), 0.5);
  };
  const Tensor z0 = Tensor::matrix(2, 2, {1, -2, 0.25, 8});
  for (auto m : {SolverMethod::euler, SolverMethod::heun}) {
    const Tensor a = ode_solve(z0, c, 0.0, 1.0, solver(m, 4));
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.at(k) == z0.at(k) + 0.5);
    for (std::size_t n : {1, 3, 7, 100}) {
      const Tensor b = ode_solve(z0, c, 0.9, 0.2, solver(m, n));
      for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(b.at(k) - (z0.at(k) - 0.35)) < 1e-12);
    }
  }
  const Tensor same = ode_solve(z0, c, 0.4, 0.4, solver(SolverMethod::heun, 10));
  for (std::size_t k = 0; k < 4; ++k) CHECK(same.at(k) == z0.at(k));
  CHECK_THROWS(ode_solve(z0, c, 0.0, 1.5, solver(SolverMethod::heun, 10)));
}

TEST_CASE("euler and heun on the linear field") {
  const VelocityField lin = [](const Tensor& z, double) { return z; };
  const Tensor z0 = Tensor::vector({1.0, -0.5});
  const Tensor z0m = Tensor::matrix(1, 2, {1.0, -0.5});
  for (std::size_t n : {1, 10, 100}) {
    const Tensor e = ode_solve(z0m, lin, 0.0, 1.0, solver(SolverMethod::euler, n));
    const double factor = std::pow(1.0 + 1.0 / n, static_cast<double>(n));
    CHECK(e.at(0) == doctest::Approx(factor).epsilon(1e-12));
    CHECK(e.at(1) == doctest::Approx(-0.5 * factor).epsilon(1e-12));
  }
  const Tensor e100 = ode_solve(z0m, lin, 0.0, 1.0, solver(SolverMethod::euler, 100));
  CHECK(std::abs(e100.at(0) / std::exp(1.0) - 1.0) < 0.014);

  const auto heun_error = [&](std::size_t n) {
    return std::abs(ode_solve(z0m, lin, 0.0, 1.0, solver(SolverMethod::heun, n)).at(0) -
                    std::exp(1.0));
  };
  const double ratio = heun_error(200) / heun_error(100);
  CHECK(ratio >= 0.2);
  CHECK(ratio <= 0.35);
  (void)z0;
}

TEST_CASE("non-finite states report the failing step") {
  const VelocityField blow = [](const Tensor& z, double t) {
    return t > 0.5 ? Tensor::full(z.shape(), 1e308) : Tensor::zeros(z.shape());
  };
  try {
    ode_solve(Tensor::full({1, 1}, 1.7e308), blow, 0.0, 1.0, solver(SolverMethod::euler, 10));
    FAIL("expected failure");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("zero drift is a stationary flow") {
  ModelConfig cfg = small_model();
  cfg.zero_drift_head = true;
  const FlowBindModel m({{"A", 3}}, cfg, Rng(1));
  Rng rng(2);
  const Tensor z = random_tensor({5, 4}, rng, false);
  const Tensor enc = encode_to_shared(z, m.drift(0), SolverSpec{});
  const Tensor dec = decode_from_shared(z, m.drift(0), SolverSpec{});
  for (std::size_t k = 0; k < z.numel(); ++k) {
    CHECK(enc.at(k) == z.at(k));
    CHECK(dec.at(k) == z.at(k));
  }
}

TEST_CASE("drift fitted to a constant displacement encodes to z - c") {
  Rng rng(3);
  DriftConfig dc;
  dc.latent_dim = 2;
  dc.blocks = 1;
  dc.hidden_mult = 2;
  dc.time_dim = 8;
  DriftNetwork net(dc, rng);
  const std::vector<double> c{0.4, -0.9};
  const std::size_t batch = 256;
  std::vector<double> zs(batch * 2), ts(batch), cs;
  for (double& v : zs) v = rng.uniform(-3.0, 3.0);
  for (double& v : ts) v = rng.uniform();
  for (std::size_t r = 0; r < batch; ++r) cs.insert(cs.end(), c.begin(), c.end());
  const Tensor z = Tensor::matrix(batch, 2, zs), t = Tensor::vector(ts);
  const Tensor target = Tensor::matrix(batch, 2, cs);
  const ParameterList params = net.parameters();
  for (int step = 0; step < 600; ++step) {
    const Tensor r = sub(net(z, t), target);
    backward(mean(mul(r, r)));
    for (auto p : params) {
      auto w = p.tensor.mutable_data();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= 0.1 * p.tensor.grad()[k];
      p.tensor.zero_grad();
    }
  }
  const Tensor probe = Tensor::matrix(3, 2, {1.0, 1.0, -2.0, 0.5, 0.0, 2.5});
  const Tensor enc = encode_to_shared(probe, net, SolverSpec{});
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t col = 0; col < 2; ++col) {
      CHECK(std::abs(enc.at(r, col) - (probe.at(r, col) - c[col])) < 1e-6);
    }
  }
}

TEST_CASE("round trip through the shared latent converges with the step count") {
  Rng rng(4);
  DriftConfig dc;
  dc.latent_dim = 3;
  dc.blocks = 2;
  dc.hidden_mult = 2;
  dc.time_dim = 8;
  DriftNetwork net(dc, rng);
  randomize(net.parameters(), rng, 0.3);
  const Tensor z = random_tensor({16, 3}, rng, false);
  std::vector<double> errors;
  for (std::size_t n : {25, 50, 100}) {
    const SolverSpec s = solver(SolverMethod::heun, n);
    errors.push_back(relative_error(decode_from_shared(encode_to_shared(z, net, s), net, s), z));
  }
  CHECK(errors[2] <= 1e-2);
  CHECK(errors[1] <= errors[0] * 1.1);
  CHECK(errors[2] <= errors[1] * 1.1);
}

TEST_CASE("aggregate_latents examples") {
  const Tensor a = Tensor::matrix(1, 2, {1, 0});
  const Tensor b = Tensor::matrix(1, 2, {0, 1});
  const Tensor m = aggregate_latents({a, b});
  CHECK(m.at(0) == 0.5);
  CHECK(m.at(1) == 0.5);
  const Tensor s = aggregate_latents({a});
  CHECK(s.at(0) == 1.0);
  const Tensor odd = Tensor::matrix(1, 2, {0.1, 1.0 / 3.0});
  const Tensor same = aggregate_latents({odd, odd, odd});
  CHECK(same.at(0) == 0.1);
  CHECK(same.at(1) == 1.0 / 3.0);
  CHECK_THROWS(aggregate_latents({}));
  CHECK_THROWS(aggregate_latents({a, Tensor::zeros({2, 2})}));
}

TEST_CASE("translate pipeline") {
  Rng rng(5);
  FlowBindModel m({{"A", 2}, {"B", 3}, {"C", 2}}, small_model(), Rng(6));
  randomize(m.drift_parameters(), rng, 0.3);
  std::vector<NormStats> stats = unit_stats(m);
  stats[0] = {{1.0, -2.0}, {2.0, 0.5}};
  const Matrix a = random_matrix(4, 2, rng), b = random_matrix(4, 3, rng);

  SUBCASE("source order does not matter") {
    const Matrix x = translate({{{0, a}, {1, b}}, 2, SolverSpec{}}, m, stats);
    const Matrix y = translate({{{1, b}, {0, a}}, 2, SolverSpec{}}, m, stats);
    CHECK(x == y);
    CHECK(x.rows == 4);
    CHECK(x.cols == 2);
  }
  SUBCASE("single source matches the explicit pipeline") {
    const SolverSpec s{};
    const Tensor zs = encode_to_shared(m.embed(0, standardize(a, stats[0])), m.drift(0), s);
    const Matrix expected = destandardize(
        m.extract(1, decode_from_shared(zs, m.drift(1), s)), stats[1]);
    CHECK(translate({{{0, a}}, 1, s}, m, stats) == expected);
  }
  SUBCASE("errors and empty input") {
    CHECK_THROWS(translate({{{0, a}, {0, a}}, 1, SolverSpec{}}, m, stats));
    CHECK_THROWS(translate({{{7, a}}, 1, SolverSpec{}}, m, stats));
    CHECK_THROWS(translate({{{0, a}}, 9, SolverSpec{}}, m, stats));
    CHECK_THROWS(translate({{}, 1, SolverSpec{}}, m, stats));
    CHECK_THROWS(translate({{{0, a}, {1, random_matrix(3, 3, rng)}}, 2, SolverSpec{}}, m, stats));
    CHECK_THROWS(translate({{{0, random_matrix(4, 3, rng)}}, 1, SolverSpec{}}, m, stats));
    const Matrix empty = translate({{{0, Matrix(0, 2)}}, 1, SolverSpec{}}, m, stats);
    CHECK(empty.rows == 0);
  }
}

TEST_CASE("latent interpolation endpoints are exact decodes") {
  Rng rng(7);
  FlowBindModel m({{"A", 2}, {"B", 3}}, small_model(), Rng(8));
  randomize(m.drift_parameters(), rng, 0.3);
  const auto stats = unit_stats(m);
  const Tensor za = random_tensor({3, 4}, rng, false);
  const Tensor zb = random_tensor({3, 4}, rng, false);
  for (std::size_t steps : {2, 5}) {
    const auto path = latent_interpolate(za, zb, steps, 1, m, stats, SolverSpec{});
    REQUIRE(path.size() == steps);
    CHECK(path.front() == decode_target(za, 1, m, stats, SolverSpec{}));
    CHECK(path.back() == decode_target(zb, 1, m, stats, SolverSpec{}));
  }
  CHECK_THROWS(latent_interpolate(za, zb, 1, 1, m, stats, SolverSpec{}));
}
