#include <cmath>

#include "doctest.h"
#include "hbsde/bsde_approx.hpp"
#include "hbsde/experiment.hpp"
#include "hbsde/random.hpp"

using namespace hbsde;

namespace {

ProblemFunctions terminal(std::vector<double> coeffs) {
  ProblemFunctions p;
  p.Phi = Terminal::polynomial(std::move(coeffs));
  return p;
}

PdeGridConfig grid(int n_y, int n_t) {
  PdeGridConfig g;
  g.n_y = n_y;
  g.n_t = n_t;
  return g;
}

// Estimator trajectory frozen at θ with the filter state m_tau at τ.
EstimatorTrajectory frozen(const ModelSpec& spec, const SamplePath& x, double theta, double m_tau) {
  EstimatorTrajectory E;
  E.t = x.t;
  E.k_tau = steps_for(spec.tau, x.dt());
  E.preliminary = theta;
  E.m_tau = m_tau;
  E.theta_star = Eigen::VectorXd::Constant(x.size(), theta);
  E.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(x.size(), true);
  E.lo = spec.theta_lo;
  E.hi = spec.theta_hi;
  return E;
}

struct Fixture {
  ModelSpec spec = canonical_model(0.01);
  double dt = 1e-4;
  RiccatiTable table{spec, 61, dt, steps_for(spec.T, dt)};
  SimulatedData data = simulate_data(spec, 1.0, dt, 17);
  FilterTrajectory F0 = run_filter(spec, table.node(table.node_index(1.0)), data.x);
};

}  // namespace

TEST_CASE("frozen adaptive filter reproduces the filter at the true parameter") {
  Fixture fx;
  const Index kt = 2500;
  const SamplePath same = adaptive_filter(fx.spec, fx.data.x, frozen(fx.spec, fx.data.x, 1.0, fx.F0.m[kt]), fx.table,
                                          fx.F0.m[kt]);
  CHECK((same.v - fx.F0.m.tail(same.size())).cwiseAbs().maxCoeff() < 1e-10);

  // started off by one, the gap contracts at rate about γ*f²/(εσ²) = 1/ε
  const SamplePath off = adaptive_filter(fx.spec, fx.data.x, frozen(fx.spec, fx.data.x, 1.0, fx.F0.m[kt]), fx.table,
                                         fx.F0.m[kt] + 1.0);
  const Eigen::VectorXd gap = (off.v - fx.F0.m.tail(off.size())).cwiseAbs();
  CHECK(gap[0] == doctest::Approx(1.0));
  CHECK(gap[500] < std::exp(-4.0));
  CHECK(gap[gap.size() - 1] < 1e-10);
}

TEST_CASE("zero observation and zero start keep the adaptive filter at zero") {
  Fixture fx;
  SamplePath x = fx.data.x;
  x.v.setZero();
  const SamplePath m = adaptive_filter(fx.spec, x, frozen(fx.spec, x, 1.3, 0.0), fx.table, 0.0);
  CHECK(m.v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("oracle mode gives the reference solution") {
  Fixture fx;
  const Eigen::VectorXd nodes = theta_nodes(fx.spec, 13);
  const PdeFamily fam = theta_family(terminal({0.0, 0.0, 1.0}), fx.spec, VolatilityMode::Epsilon, nodes, grid(201, 200));
  const EstimatorTrajectory E = frozen(fx.spec, fx.data.x, 1.0, fx.F0.m[2500]);
  ReferenceInputs ref;
  const ApproximationResult R = approximate(fx.spec, fx.data.x, fam, E, fx.table, &ref);
  CHECK((R.Z_hat - R.Z_ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((R.s_hat - R.s_ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((R.Z_swap - R.Z_ref).cwiseAbs().maxCoeff() == 0.0);
  const Index last = R.t.size() - 1;
  CHECK(R.Z_hat[last] == doctest::Approx(R.m_hat[last] * R.m_hat[last]).epsilon(1e-3));
}

TEST_CASE("linear terminal condition is transported by the drift") {
  Fixture fx;
  const PdeFamily fam = theta_family(terminal({0.0, 1.0}), fx.spec, VolatilityMode::Epsilon,
                                     theta_nodes(fx.spec, 13), grid(201, 200));
  const EstimatorTrajectory E = onestep_process(fx.spec, fx.data.x, 1.2);
  const ApproximationResult R = approximate(fx.spec, fx.data.x, fam, E, fx.table);
  for (Index i = 0; i < R.t.size(); i += 500)
    CHECK(R.Z_hat[i] == doctest::Approx(R.m_hat[i] * std::exp(-(1.0 - R.t[i]))).epsilon(1e-3));
}

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments") {
  const GaussHermite g = gauss_hermite(20);
  CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(g.weights.dot(g.nodes) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(g.weights.dot(g.nodes.array().square().matrix()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.weights.dot(g.nodes.array().pow(4).matrix()) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(g.weights.dot(g.nodes.array().pow(8).matrix()) == doctest::Approx(105.0).epsilon(1e-11));
}

TEST_CASE("state moments") {
  const OuMoments m = ou_moments(canonical_model(), 1.0, 0.75);
  CHECK(m.mean == 0.0);
  CHECK(m.variance == doctest::Approx((1.0 - std::exp(-1.5)) / 2.0).epsilon(1e-10));
}

TEST_CASE("limit of the scaled error by quadrature") {
  const ModelSpec spec = canonical_model(0.01);
  const Eigen::VectorXd nodes = theta_nodes(spec, 31);
  const PdeFamily lin = theta_family(terminal({0.0, 1.0}), spec, VolatilityMode::Limit, nodes, grid(401, 400));
  LimitTerms L = theorem1_limit(spec, lin, 1.0, 0.75);
  CHECK(L.total() == doctest::Approx(std::exp(-0.5)).epsilon(1e-3));
  CHECK(std::abs(L.estimator_term) < 1e-10);

  const PdeFamily quad = theta_family(terminal({0.0, 0.0, 1.0}), spec, VolatilityMode::Limit, nodes, grid(401, 400));
  L = theorem1_limit(spec, quad, 1.0, 0.75);
  const double ey2 = (1.0 - std::exp(-1.5)) / 2.0;
  const double filter = 4.0 * std::exp(-1.0) * ey2;
  const double estimator = std::pow(1.0 - std::exp(-0.5), 2) / 0.25;
  CHECK(L.filter_term == doctest::Approx(filter).epsilon(2e-3));
  CHECK(L.estimator_term == doctest::Approx(estimator).epsilon(5e-3));
  CHECK(L.total() == doctest::Approx(1.19).epsilon(5e-3));
}

TEST_CASE("zero weight gives a zero integrated statistic") {
  Fixture fx;
  const PdeFamily fam = theta_family(terminal({0.0, 0.0, 1.0}), fx.spec, VolatilityMode::Epsilon,
                                     theta_nodes(fx.spec, 13), grid(201, 200));
  const PdeFamily lim = theta_family(terminal({0.0, 0.0, 1.0}), fx.spec, VolatilityMode::Limit,
                                     theta_nodes(fx.spec, 13), grid(201, 200));
  ReferenceInputs ref{1.0, &fx.data.y, &lim};
  const ApproximationResult R =
      approximate(fx.spec, fx.data.x, fam, onestep_process(fx.spec, fx.data.x, 1.1), fx.table, &ref);
  const Eigen::VectorXd ev = (Eigen::VectorXd(2) << 0.5, 0.75).finished();
  const ReplicateErrors e = summarize(R, ev, ev, [](double) { return 0.0; });
  CHECK(e.integrated == 0.0);
  CHECK(e.integrated_ref == 0.0);
  CHECK(e.pointwise.size() == 2);
  CHECK(e.pointwise[0] == doctest::Approx((R.Z_hat[2500] - R.Z_limit[2500]) / 0.1));
}

TEST_CASE("mean estimate") {
  const MeanEstimate m = mean_estimate((Eigen::VectorXd(4) << 1.0, 2.0, 3.0, 6.0).finished());
  CHECK(m.mean == 3.0);
  CHECK(m.variance == doctest::Approx(14.0 / 3.0));
  CHECK(m.std_error == doctest::Approx(std::sqrt(14.0 / 3.0 / 4.0)));
  CHECK(m.n == 4);
}
