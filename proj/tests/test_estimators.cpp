#include <cmath>

#include "doctest.h"
#include "hbsde/estimators.hpp"
#include "hbsde/experiment.hpp"
#include "hbsde/kalman.hpp"
#include "hbsde/random.hpp"

using namespace hbsde;

TEST_CASE("likelihood vanishes when the filter is identically zero") {
  ModelSpec spec = canonical_model(0.1);
  spec.b = VolatilityFunction::theta_scaled({0.0});
  const SimulatedData d = simulate_data(canonical_model(0.1), 1.0, 1e-3, 3);
  CHECK(log_likelihood(spec, d.x, 1.0) == 0.0);
}

TEST_CASE("likelihood depends on increments only") {
  const ModelSpec spec = canonical_model(0.1);
  SimulatedData d = simulate_data(spec, 1.0, 1e-3, 8);
  const double base = log_likelihood(spec, d.x, 1.2);
  d.x.v.array() += 3.5;
  CHECK(log_likelihood(spec, d.x, 1.2) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("likelihood ratio against the true parameter is positive on average") {
  // the mean log-likelihood ratio estimates a Kullback-Leibler divergence
  const ModelSpec spec = canonical_model(0.05);
  const int n = 200;
  Eigen::VectorXd lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    const SimulatedData d = simulate_data(spec, 1.0, 1e-4, split_seed(31, i));
    const double at = log_likelihood(spec, d.x, 1.0);
    lo[i] = at - log_likelihood(spec, d.x, 0.6);
    hi[i] = at - log_likelihood(spec, d.x, 1.6);
  }
  for (const Eigen::VectorXd* v : {&lo, &hi}) {
    const double mean = v->mean();
    const double se = std::sqrt((v->array() - mean).square().sum() / (n - 1) / n);
    CHECK(mean > 2.0 * se);
  }
}

TEST_CASE("MLE stays inside the parameter interval and is reproducible") {
  const ModelSpec spec = canonical_model(0.01);
  const SimulatedData d = simulate_data(spec, 0.51, 1e-4, 12);
  const LikelihoodCurve c = mle_preliminary(spec, d.x, 41);
  CHECK(c.theta_hat >= spec.theta_lo);
  CHECK(c.theta_hat < 0.8);
  CHECK(mle_preliminary(spec, d.x, 41).theta_hat == c.theta_hat);
  const SimulatedData one = simulate_data(spec, 1.0, 1e-4, 13), two = simulate_data(spec, 1.0, 1e-4, 14);
  CHECK(mle_preliminary(spec, one.x, 41).theta_hat != mle_preliminary(spec, two.x, 41).theta_hat);

  const RiccatiTable table(spec, 41, 1e-4, steps_for(spec.tau, 1e-4));
  CHECK(mle_preliminary(spec, d.x, 41, &table).theta_hat == doctest::Approx(c.theta_hat).epsilon(1e-3));
}

TEST_CASE("Fisher information closed forms") {
  const ModelSpec spec = canonical_model();
  CHECK(fisher_information(spec, 1.0, 0.0, 0.25) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(fisher_information(spec, 2.0, 0.25, 1.0) == doctest::Approx(0.1875).epsilon(1e-12));
  ModelSpec flat = spec;
  flat.b = VolatilityFunction::theta_scaled({1.0}, 0.0);
  CHECK(fisher_information(flat, 1.0, 0.0, 1.0) == 0.0);

  const Eigen::VectorXd t = uniform_grid(1e-3, 1000);
  const Eigen::VectorXd cum = fisher_cumulative(spec, 1.0, t, 250);
  CHECK(cum[250] == 0.0);
  CHECK(cum[1000] == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("kernel reproduces a linear path") {
  SamplePath x{uniform_grid(1e-3, 1000), {}};
  x.v = 2.5 * x.t;
  for (double phi : {0.01, 0.05, 0.2}) {
    CHECK(kernel_smooth(x, 0.5, phi, KernelSide::Forward) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(kernel_smooth(x, 0.5, phi, KernelSide::Backward) == doctest::Approx(2.5).epsilon(1e-12));
  }
  CHECK(kernel_weights(5, KernelSide::Forward).sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(kernel_smooth(x, 0.02, 0.05, KernelSide::Backward), EstimationError);
}

TEST_CASE("kernel recovers the signal on a noise-free path with first-order error") {
  // X_t = ∫ sin(3s) ds, so the smoothed derivative tends to sin(3t)
  SamplePath x{uniform_grid(1e-4, 10000), {}};
  x.v = (1.0 - (3.0 * x.t.array()).cos()) / 3.0;
  const double t = 0.4, exact = std::sin(3.0 * t);
  const double e1 = std::abs(kernel_smooth(x, t, 0.04, KernelSide::Forward) - exact);
  const double e2 = std::abs(kernel_smooth(x, t, 0.02, KernelSide::Forward) - exact);
  CHECK(e1 < 0.05);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("kernel variance on pure noise") {
  ModelSpec spec = canonical_model(0.1);
  spec.b = VolatilityFunction::theta_scaled({0.0});
  const double phi = 0.05;
  const int n = 500;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const SimulatedData d = simulate_data(spec, 1.0, 1e-3, split_seed(40, i));
    const double v = kernel_smooth(d.x, 0.3, phi, KernelSide::Forward);
    s += v, s2 += v * v;
  }
  const double expected = 0.01 * (4.0 / 3.0) / phi;
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(expected).epsilon(0.25));
}

TEST_CASE("closed-form inverse of the substitution map") {
  const ModelSpec spec = canonical_model();
  CHECK(psi_function(spec, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
  PsiInverse r = invert_psi(spec, 0.25);
  CHECK(std::abs(r.theta - 1.0) <= 1e-6);
  CHECK(r.event == SubstitutionEvent::Inside);
  r = invert_psi(spec, 0.05);
  CHECK(r.theta == spec.theta_lo);
  CHECK(r.event == SubstitutionEvent::Below);
  r = invert_psi(spec, 0.0625);
  CHECK(r.event == SubstitutionEvent::Below);
  r = invert_psi(spec, 5.0);
  CHECK(r.theta == spec.theta_hi);
  CHECK(r.event == SubstitutionEvent::Above);
}

TEST_CASE("substitution estimator is bounded and roughly centred") {
  const ModelSpec spec = canonical_model(0.01);
  const int n = 100;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const SimulatedData d = simulate_data(spec, 1.0, 1e-4, split_seed(50, i));
    const SubstitutionPieces p = substitution_estimator(spec, d.x, 1.5, 1.0);
    CHECK(p.theta_check >= spec.theta_lo);
    CHECK(p.theta_check <= spec.theta_hi);
    CHECK(p.bandwidth == doctest::Approx(0.015));
    mean += p.theta_check / n;
  }
  CHECK(std::abs(mean - 1.0) < 0.15);
}

TEST_CASE("non-monotone substitution map is refused") {
  ModelSpec spec = canonical_model(0.1);
  spec.b = VolatilityFunction::tabulated({0.5, 1.0, 2.0}, {0.0, 1.0}, {1.0, 1.0, 2.0, 2.0, 0.5, 0.5});
  const SimulatedData d = simulate_data(canonical_model(0.1), 1.0, 1e-3, 1);
  CHECK_THROWS_AS(substitution_estimator(spec, d.x, 1.5, 1.0), EstimationError);
}
