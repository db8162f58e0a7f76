#include <cmath>

#include "doctest.h"
#include "hbsde/random.hpp"
#include "hbsde/sde_sim.hpp"

using namespace hbsde;

TEST_CASE("zero volatility gives the Euler product") {
  ModelSpec spec = canonical_model();
  spec.b = VolatilityFunction::theta_scaled({0.0});
  spec.y0 = 2.0;
  const double dt = 1e-4;
  const NoiseBundle noise = NoiseBundle::generate(1, dt, 10000);
  const SamplePath y = simulate_forward(spec, 1.0, noise);
  CHECK(y.v[y.size() - 1] == doctest::Approx(2.0 * std::pow(1.0 - dt, 10000)).epsilon(1e-12));
  CHECK(y.v[y.size() - 1] == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-4));
}

TEST_CASE("terminal variance of the hidden state") {
  const ModelSpec spec = canonical_model();
  const int n = 10000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const SamplePath y = simulate_forward(spec, 1.0, NoiseBundle::generate(split_seed(5, i), 1e-2, 100));
    const double v = y.v[y.size() - 1];
    s += v, s2 += v * v;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(var == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(0.05));
}

TEST_CASE("same seed gives identical paths") {
  const ModelSpec spec = canonical_model();
  const NoiseBundle a = NoiseBundle::generate(42, 1e-3, 1000), b = NoiseBundle::generate(42, 1e-3, 1000);
  CHECK(simulate_forward(spec, 1.2, a).v == simulate_forward(spec, 1.2, b).v);
  CHECK(simulate_observation(spec, simulate_forward(spec, 1.2, a), a).v ==
        simulate_observation(spec, simulate_forward(spec, 1.2, b), b).v);
  CHECK(NoiseBundle::generate(43, 1e-3, 1000).dV != a.dV);
}

TEST_CASE("noise-free observation is the Riemann sum") {
  const ModelSpec spec = canonical_model().with_epsilon(1.0);
  ModelSpec quiet = spec;
  quiet.epsilon = 0.0;
  const NoiseBundle noise = NoiseBundle::generate(3, 1e-3, 1000);
  const SamplePath y = simulate_forward(spec, 1.0, noise);
  const SamplePath x = simulate_observation(quiet, y, noise);
  double acc = 0.0;
  for (Index k = 0; k < 1000; ++k) acc += y.v[k] * 1e-3;
  CHECK(x.v[1000] == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("observation noise variance") {
  const ModelSpec spec = canonical_model(0.1);
  const int n = 1000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const NoiseBundle noise = NoiseBundle::generate(split_seed(11, i), 1e-3, 1000);
    const SamplePath y = simulate_forward(spec, 1.0, noise);
    const SamplePath x = simulate_observation(spec, y, noise);
    double integral = 0.0;
    for (Index k = 0; k < 1000; ++k) integral += y.v[k] * 1e-3;
    const double r = x.v[1000] - integral;
    s += r, s2 += r * r;
  }
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("split seeds give uncorrelated replicates") {
  const ModelSpec spec = canonical_model();
  const int n = 2000;
  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = simulate_forward(spec, 1.0, NoiseBundle::generate(split_seed(9, 2 * i), 1e-2, 100)).v[100];
    b[i] = simulate_forward(spec, 1.0, NoiseBundle::generate(split_seed(9, 2 * i + 1), 1e-2, 100)).v[100];
  }
  const double rho = ((a.array() - a.mean()) * (b.array() - b.mean())).sum() /
                     std::sqrt((a.array() - a.mean()).square().sum() * (b.array() - b.mean()).square().sum());
  CHECK(std::abs(rho) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("parameter outside the interval is refused") {
  const ModelSpec spec = canonical_model();
  const NoiseBundle noise = NoiseBundle::generate(1, 1e-2, 100);
  CHECK_THROWS_AS(simulate_forward(spec, 2.5, noise), SimulationError);
  CHECK_THROWS_AS(simulate_forward(spec, 0.5, noise), SimulationError);
}
