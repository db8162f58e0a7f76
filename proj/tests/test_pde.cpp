#include <cmath>

#include "doctest.h"
#include "hbsde/pde.hpp"

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

double inner_error(const PdeSolution& s, const std::function<double(double, double)>& exact) {
  const double lo = s.y[0], hi = s.y[s.y.size() - 1], c = 0.5 * (lo + hi), q = 0.25 * (hi - lo);
  double worst = 0.0;
  for (Index n = 0; n < s.t.size(); ++n)
    for (Index j = 0; j < s.y.size(); ++j)
      if (std::abs(s.y[j] - c) <= q) worst = std::max(worst, std::abs(s.u(n, j) - exact(s.t[n], s.y[j])));
  return worst;
}

}  // namespace

TEST_CASE("linear terminal condition decays with the drift") {
  const ModelSpec spec = canonical_model(0.01);
  const PdeSolution s = solve_pde(terminal({0.0, 1.0}), spec, 1.0, VolatilityMode::Limit, grid(401, 400));
  CHECK(inner_error(s, [](double t, double y) { return y * std::exp(-(1.0 - t)); }) < 1e-3);
  CHECK(eval_u(s, 0.0, 2.0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-3));
  // bilinear interpolation reproduces the linear profile between nodes
  const double y = 0.5 * (s.y[200] + s.y[201]);
  CHECK(eval_u(s, s.t[10], y) == doctest::Approx(0.5 * (s.u(10, 200) + s.u(10, 201))).epsilon(1e-14));
}

TEST_CASE("quadratic terminal condition matches the second moment") {
  const ModelSpec spec = canonical_model(0.01);
  const double theta = 1.3;
  const PdeSolution s = solve_pde(terminal({0.0, 0.0, 1.0}), spec, theta, VolatilityMode::Limit, grid(401, 400));
  auto exact = [&](double t, double y) {
    const double e = std::exp(-2.0 * (1.0 - t));
    return y * y * e + theta * theta * (1.0 - e) / 2.0;
  };
  CHECK(inner_error(s, exact) < 1e-3);
  CHECK(eval_u(s, 0.5, 0.7) == doctest::Approx(exact(0.5, 0.7)).epsilon(1e-3));
  CHECK(eval_u_y(s, 0.5, 0.7) == doctest::Approx(2.0 * 0.7 * std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("constants are preserved and the terminal row is exact") {
  const ModelSpec spec = canonical_model(0.01);
  const PdeSolution s = solve_pde(terminal({5.0}), spec, 1.0, VolatilityMode::Epsilon, grid(101, 50));
  CHECK((s.u.array() - 5.0).abs().maxCoeff() < 1e-12);

  ProblemFunctions p = terminal({0.0, 0.0, 1.0});
  p.F = {Driver::Kind::Tanh, 0.2, 0.1, -0.5, 0.3};
  const PdeSolution q = solve_pde(p, spec, 1.0, VolatilityMode::Epsilon, grid(101, 50));
  double gap = 0.0;
  for (Index j = 0; j < q.y.size(); ++j) gap = std::max(gap, std::abs(q.u(q.t.size() - 1, j) - q.y[j] * q.y[j]));
  CHECK(gap == 0.0);
  CHECK(q.max_picard_iterations > 1);
  CHECK(eval_u(q, q.t[7], q.y[33]) == q.u(7, 33));
}

TEST_CASE("grid checks") {
  const ModelSpec spec = canonical_model(0.01);
  CHECK_THROWS_AS(solve_pde(terminal({1.0}), spec, 1.0, VolatilityMode::Limit, grid(4, 10)), PdeError);
  PdeGridConfig g = grid(101, 10);
  g.y_min = 1.0;
  g.y_max = 3.0;
  CHECK_THROWS_AS(solve_pde(terminal({1.0}), spec, 1.0, VolatilityMode::Limit, g), PdeError);
  const PdeSolution s = solve_pde(terminal({0.0, 1.0}), spec, 1.0, VolatilityMode::Limit, grid(101, 10));
  CHECK_THROWS_AS(eval_u(s, 0.5, s.y[100] + 1.0), PdeDomainError);
}

TEST_CASE("default domain is wide enough") {
  const ModelSpec spec = canonical_model(0.01);
  CHECK(boundary_influence(terminal({0.0, 0.0, 1.0}), spec, 1.0, VolatilityMode::Limit, grid(201, 200)) < 1e-4);
}

TEST_CASE("parameter family derivatives") {
  const ModelSpec spec = canonical_model(0.01);
  const Eigen::VectorXd nodes = theta_nodes(spec, 31);
  CHECK(nodes[0] == spec.theta_lo);
  CHECK(nodes[30] == spec.theta_hi);

  const PdeFamily lin = theta_family(terminal({0.0, 1.0}), spec, VolatilityMode::Limit, nodes, grid(201, 200));
  CHECK(std::abs(eval_u_dot(lin, 0.3, 0.4, 1.1)) < 1e-8);

  const PdeFamily quad = theta_family(terminal({0.0, 0.0, 1.0}), spec, VolatilityMode::Limit, nodes, grid(401, 400));
  CHECK(eval_u_dot(quad, 0.0, 0.0, 1.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(2e-3));
  CHECK(eval_u_dot(quad, 0.5, 0.3, 1.37) == doctest::Approx(1.37 * (1.0 - std::exp(-1.0))).epsilon(2e-3));
  CHECK(eval_u(quad, 0.0, 0.0, 1.0) == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-3));

  CHECK_THROWS_WITH_AS(theta_family(terminal({0.0, 1.0}), spec, VolatilityMode::Limit,
                                    Eigen::VectorXd::Constant(1, 1.0), grid(51, 10)),
                       "need ≥ 3 nodes for central difference", PdeError);
}

TEST_CASE("filter-driven volatility approaches the limit") {
  const ModelSpec spec = canonical_model(0.01);
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
  const Eigen::VectorXd eps = pde_volatility(spec, 1.2, VolatilityMode::Epsilon, t, 1e-4);
  const Eigen::VectorXd lim = pde_volatility(spec, 1.2, VolatilityMode::Limit, t, 1e-4);
  CHECK(eps[0] == 0.0);
  CHECK((eps.tail(9) - lim.tail(9)).cwiseAbs().maxCoeff() < 0.02);
}
