#include <cmath>
#include <random>

#include "doctest.h"
#include "hbsde/kalman.hpp"
#include "hbsde/random.hpp"
#include "hbsde/sde_sim.hpp"

using namespace hbsde;

namespace {

// γ' = b² - 2aγ - kγ², γ(0) = 0 with constant coefficients, k = f²/(ε²σ²).
double riccati_exact(double a, double b, double k, double t) {
  const double d = std::sqrt(a * a + k * b * b);
  const double r1 = (-a + d) / k, r2 = (-a - d) / k;
  const double e = std::exp(-2.0 * d * t);
  return r1 * r2 * (1.0 - e) / (r2 - r1 * e);
}

SamplePath observe(const ModelSpec& spec, double theta, std::uint64_t seed, double dt, SamplePath* y = nullptr) {
  const NoiseBundle noise = NoiseBundle::generate(seed, dt, steps_for(spec.T, dt));
  const SamplePath yy = simulate_forward(spec, theta, noise);
  if (y) *y = yy;
  return simulate_observation(spec, yy, noise);
}

}  // namespace

TEST_CASE("Riccati steady states") {
  ModelSpec spec = canonical_model(0.1);
  spec.a = TimeFunction::constant(0.0);
  spec.T = 3.0;
  spec.tau = 1.0;
  RiccatiTrajectory r = solve_riccati(spec, 1.0, 1e-4);
  CHECK(r.gamma[r.t.size() - 1] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(r.gamma_star[r.t.size() - 1] == doctest::Approx(1.0).epsilon(1e-9));

  spec.a = TimeFunction::constant(1.0);
  r = solve_riccati(spec, 1.0, 1e-4);
  CHECK(r.gamma[r.t.size() - 1] == doctest::Approx(0.01 * (-1.0 + std::sqrt(1.0 + 100.0))).epsilon(1e-9));
  CHECK(r.gamma[r.t.size() - 1] == doctest::Approx(0.0905).epsilon(1e-3));
}

TEST_CASE("Riccati trajectory against the closed form") {
  const ModelSpec spec = canonical_model(0.05);
  const double theta = 1.3;
  const RiccatiTrajectory r = solve_riccati(spec, theta, 1e-3);
  double worst = 0.0;
  for (Index k = 0; k < r.t.size(); ++k)
    worst = std::max(worst, std::abs(r.gamma[k] - riccati_exact(1.0, theta, 1.0 / (0.05 * 0.05), r.t[k])));
  CHECK(worst < 1e-9);
  CHECK((r.gamma.array() >= 0.0).all());
}

TEST_CASE("Riccati sensitivity matches a central difference") {
  const ModelSpec spec = canonical_model(0.05);
  const double h = 1e-5;
  const RiccatiTrajectory r = solve_riccati(spec, 1.1, 1e-3);
  const RiccatiTrajectory up = solve_riccati(spec, 1.1 + h, 1e-3), dn = solve_riccati(spec, 1.1 - h, 1e-3);
  const Eigen::VectorXd fd = (up.gamma - dn.gamma) / (2.0 * h);
  CHECK((fd - r.gamma_dtheta).cwiseAbs().maxCoeff() < 1e-7 * r.gamma_dtheta.cwiseAbs().maxCoeff() + 1e-12);
}

TEST_CASE("zero volatility keeps the variance at zero") {
  ModelSpec spec = canonical_model(0.1);
  spec.b = VolatilityFunction::theta_scaled({0.0});
  const RiccatiTrajectory r = solve_riccati(spec, 1.0, 1e-3);
  CHECK(r.gamma.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero observation gives a zero filter") {
  const ModelSpec spec = canonical_model(0.1);
  SamplePath x;
  x.t = uniform_grid(1e-3, 1000);
  x.v = Eigen::VectorXd::Zero(1001);
  const FilterTrajectory F = run_filter(spec, solve_riccati(spec, 1.0, 1e-3), x);
  CHECK(F.m.cwiseAbs().maxCoeff() == 0.0);
  CHECK(F.m_dtheta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("filter sensitivity matches a central difference") {
  const ModelSpec spec = canonical_model(0.1);
  const double dt = 1e-4, h = 1e-4, theta = 1.0;
  const SamplePath x = observe(spec, theta, 77, dt);
  const FilterTrajectory F = run_filter(spec, solve_riccati(spec, theta, dt), x);
  const FilterTrajectory up = run_filter(spec, solve_riccati(spec, theta + h, dt), x);
  const FilterTrajectory dn = run_filter(spec, solve_riccati(spec, theta - h, dt), x);
  const Eigen::VectorXd fd = (up.m - dn.m) / (2.0 * h);
  const double rel = (fd - F.m_dtheta).norm() / F.m_dtheta.norm();
  CHECK(rel < 1e-3);
}

TEST_CASE("innovation of a correctly specified filter is a Wiener process") {
  const ModelSpec spec = canonical_model(0.1);
  const double dt = 1e-3;
  const int n = 500;
  const RiccatiTrajectory r = solve_riccati(spec, 1.0, dt);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const SamplePath x = observe(spec, 1.0, split_seed(21, i), dt);
    const SamplePath w = innovation(spec, run_filter(spec, r, x), x);
    const double wt = w.v[w.size() - 1];
    s += wt, s2 += wt * wt;
    if (i == 0) {
      double qv = 0.0;
      for (Index k = 0; k + 1 < w.size(); ++k) qv += std::pow(w.v[k + 1] - w.v[k], 2);
      CHECK(std::abs(qv - spec.T) < 5.0 * std::sqrt(2.0 * dt));
    }
  }
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(spec.T).epsilon(0.1));
}

TEST_CASE("noise-free innovation vanishes") {
  ModelSpec spec = canonical_model(0.1);
  spec.epsilon = 0.0;
  const SamplePath x{uniform_grid(1e-3, 10), Eigen::VectorXd::LinSpaced(11, 0.0, 1.0)};
  FilterTrajectory F;
  F.t = x.t;
  F.m = Eigen::VectorXd::Zero(11);
  CHECK(innovation(spec, F, x).v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("limit coefficients") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  LimitCoefficients c = limit_coefficients(canonical_model(), 1.0, t);
  CHECK(c.gamma0.isOnes());
  CHECK(c.A0.isOnes());

  ModelSpec spec = canonical_model();
  spec.b = VolatilityFunction::theta_scaled({2.0});
  spec.sigma = TimeFunction::constant(2.0);
  spec.f = TimeFunction::constant(4.0);
  c = limit_coefficients(spec, 1.0, t);
  CHECK(c.gamma0.isOnes());
  CHECK(c.A0.isOnes());
}

TEST_CASE("Riccati gap shrinks with the noise level") {
  const ModelSpec spec = canonical_model();
  const double coarse = lemma1_gap(spec.with_epsilon(0.1), solve_riccati(spec.with_epsilon(0.1), 1.0, 1e-4), 0.1);
  const double fine = lemma1_gap(spec.with_epsilon(0.01), solve_riccati(spec.with_epsilon(0.01), 1.0, 1e-4), 0.1);
  CHECK(fine < coarse);
}

TEST_CASE("continuous filter agrees with the discrete Kalman oracle") {
  const ModelSpec spec = canonical_model(0.1);
  const double dt = 1e-4;
  const RiccatiTrajectory r = solve_riccati(spec, 1.0, dt);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SamplePath x = observe(spec, 1.0, seed, dt);
    const FilterTrajectory F = run_filter(spec, r, x), D = discrete_kalman_oracle(spec, 1.0, x);
    CHECK((F.m - D.m).cwiseAbs().maxCoeff() <= 1e-2);
    CHECK((r.gamma - D.gamma).cwiseAbs().maxCoeff() < 1e-3);
  }

  ModelSpec still = spec;
  still.b = VolatilityFunction::theta_scaled({0.0});
  still.y0 = 1.0;
  const SamplePath x = observe(still, 1.0, 4, dt);
  const FilterTrajectory F = run_filter(still, solve_riccati(still, 1.0, dt), x);
  const FilterTrajectory D = discrete_kalman_oracle(still, 1.0, x);
  CHECK((F.m - D.m).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(F.m[F.m.size() - 1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("Riccati table interpolation") {
  const ModelSpec spec = canonical_model(0.05);
  const RiccatiTable table(spec, 7, 1e-3, 1000);
  CHECK(table.gamma_star(table.thetas()[3], 500) == table.node(3).gamma_star[500]);
  CHECK(table.node_index(table.thetas()[2]) == 2);
  CHECK(table.node_index(1.2345) == -1);
  const double mid = 0.5 * (table.thetas()[1] + table.thetas()[2]);
  const double exact = solve_riccati(spec, mid, 1e-3).gamma_star[800];
  CHECK(table.gamma_star(mid, 800) == doctest::Approx(exact).epsilon(1e-2));
  CHECK_THROWS_AS(table.gamma_star(2.5, 10), SimulationError);
}

TEST_CASE("variance stays nonnegative and matches the oracle recursion") {
  CounterRng rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSpec spec = canonical_model(0.05 + 0.5 * u(rng));
    spec.a = TimeFunction::polynomial({2.0 * u(rng) - 0.5, u(rng)});
    spec.f = TimeFunction::constant(0.5 + u(rng));
    const double theta = 0.55 + 1.4 * u(rng);
    const RiccatiTrajectory r = solve_riccati(spec, theta, 1e-3);
    CHECK((r.gamma.array() >= 0.0).all());
    SamplePath x{r.t, Eigen::VectorXd::Zero(r.t.size())};
    const FilterTrajectory D = discrete_kalman_oracle(spec, theta, x);
    CHECK((D.gamma - r.gamma).cwiseAbs().maxCoeff() < 2e-2 * r.gamma.maxCoeff());
  }
}
