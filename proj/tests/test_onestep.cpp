#include <cmath>

#include "doctest.h"
#include "hbsde/estimators.hpp"
#include "hbsde/experiment.hpp"
#include "hbsde/onestep.hpp"
#include "hbsde/random.hpp"

using namespace hbsde;

TEST_CASE("one filter run covers the whole trajectory") {
  const ModelSpec spec = canonical_model(0.05);
  const SimulatedData d = simulate_data(spec, 1.0, 1e-4, 5);
  const std::uint64_t before = filter_run_count();
  const EstimatorTrajectory E = onestep_process(spec, d.x, 1.1);
  CHECK(filter_run_count() - before == 1);
  CHECK(E.filter_runs == 1);
  CHECK(E.k_tau == 2500);
  CHECK_FALSE(E.valid[E.k_tau]);
  CHECK(E.valid[E.t.size() - 1]);
  CHECK(E.info[E.t.size() - 1] == doctest::Approx(0.75 / 2.2).epsilon(1e-9));
}

TEST_CASE("score is the likelihood derivative") {
  // ε times the θ-derivative of the log-likelihood over [τ, t]
  const ModelSpec spec = canonical_model(0.05);
  const SimulatedData d = simulate_data(spec, 1.0, 1e-4, 6);
  const double theta = 1.05, h = 1e-5;
  const EstimatorTrajectory E = onestep_process(spec, d.x, theta);
  auto ell = [&](double th, double upto) {
    ModelSpec s = spec;
    s.tau = upto;
    return log_likelihood(s, d.x, th);
  };
  const double dl = (ell(theta + h, 0.75) - ell(theta - h, 0.75) - ell(theta + h, 0.25) + ell(theta - h, 0.25)) / (2 * h);
  CHECK(E.score[7500] == doctest::Approx(spec.epsilon * dl).epsilon(1e-4));
}

TEST_CASE("no correction when the filter does not depend on the parameter") {
  ModelSpec spec = canonical_model(0.05);
  spec.b = VolatilityFunction::theta_scaled({0.0});
  const SimulatedData d = simulate_data(canonical_model(0.05), 1.0, 1e-3, 2);
  const EstimatorTrajectory E = onestep_process(spec, d.x, 1.2);
  for (Index k = 0; k < E.t.size(); ++k) {
    CHECK_FALSE(E.valid[k]);
    CHECK(E.theta_star[k] == 1.2);
  }
}

TEST_CASE("normalized error") {
  EstimatorTrajectory E;
  E.t = uniform_grid(0.1, 10);
  E.theta_star = Eigen::VectorXd::Constant(11, 1.0);
  E.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(11, true);
  CHECK(normalized_error(E, 1.0, 0.01).v.cwiseAbs().maxCoeff() == 0.0);
  E.theta_star[5] = 1.2;
  CHECK(normalized_error(E, 1.0, 0.01).v[5] == doctest::Approx(2.0));
  E.lo = 0.5, E.hi = 2.0, E.theta_star[6] = 2.7;
  CHECK(E.clamped(6) == 2.0);
}

TEST_CASE("one-step process from the true parameter has the efficient variance") {
  const ModelSpec spec = canonical_model(0.01);
  const int n = 200;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const SimulatedData d = simulate_data(spec, 1.0, 1e-4, split_seed(60, i));
    const EstimatorTrajectory E = onestep_process(spec, d.x, 1.0);
    const double eta = normalized_error(E, 1.0, spec.epsilon).v[E.t.size() - 1];
    s2 += eta * eta / n;
  }
  CHECK(s2 == doctest::Approx(2.0 / 0.75).epsilon(0.3));
}

TEST_CASE("preliminary outside the interval is refused") {
  const ModelSpec spec = canonical_model(0.05);
  const SimulatedData d = simulate_data(spec, 1.0, 1e-3, 2);
  CHECK_THROWS_AS(onestep_process(spec, d.x, 2.5), EstimationError);
}
