#include "hbsde/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hbsde/kalman.hpp"
#include "hbsde/parallel.hpp"

namespace hbsde {

namespace {

// Thomas algorithm; lower[0] and upper[m-1] are ignored.
void solve_tridiagonal(const Eigen::VectorXd& lower, Eigen::VectorXd diag, const Eigen::VectorXd& upper,
                       Eigen::VectorXd& rhs) {
  const Index m = diag.size();
  for (Index i = 1; i < m; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[m - 1] /= diag[m - 1];
  for (Index i = m - 2; i >= 0; --i) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

Eigen::VectorXd central_y(const Eigen::VectorXd& u, double h) {
  const Index J = u.size();
  Eigen::VectorXd d(J);
  for (Index j = 1; j + 1 < J; ++j) d[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
  d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  d[J - 1] = (3.0 * u[J - 1] - 4.0 * u[J - 2] + u[J - 3]) / (2.0 * h);
  return d;
}

// Interpolation position on a uniform axis; exact nodes get weight 0.
void locate(const Eigen::VectorXd& axis, double x, Index& i, double& w) {
  const Index n = axis.size();
  const double h = (axis[n - 1] - axis[0]) / static_cast<double>(n - 1);
  const double s = (x - axis[0]) / h;
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-9) {
    i = static_cast<Index>(r);
    w = 0.0;
    if (i == n - 1) i = n - 2, w = 1.0;
    return;
  }
  i = std::clamp<Index>(static_cast<Index>(std::floor(s)), 0, n - 2);
  w = s - static_cast<double>(i);
}

double bilinear(const PdeSolution& sol, const Eigen::MatrixXd& field, double t, double y) {
  const double tol_t = 1e-9 * std::max(1.0, std::abs(sol.t[sol.t.size() - 1]));
  if (t < sol.t[0] - tol_t || t > sol.t[sol.t.size() - 1] + tol_t)
    throw PdeDomainError("time outside the PDE grid");
  const double span = sol.y[sol.y.size() - 1] - sol.y[0];
  if (!(y >= sol.y[0] - 1e-12 * span && y <= sol.y[sol.y.size() - 1] + 1e-12 * span)) {
    std::ostringstream os;
    os << "state " << y << " outside the PDE domain [" << sol.y[0] << ", " << sol.y[sol.y.size() - 1]
       << "] at t = " << t;
    throw PdeDomainError(os.str());
  }
  Index i, j;
  double wt, wy;
  locate(sol.t, t, i, wt);
  locate(sol.y, y, j, wy);
  const double lo = wy == 0.0 ? field(i, j) : (1.0 - wy) * field(i, j) + wy * field(i, j + 1);
  if (wt == 0.0) return lo;
  const double hi = wy == 0.0 ? field(i + 1, j) : (1.0 - wy) * field(i + 1, j) + wy * field(i + 1, j + 1);
  return (1.0 - wt) * lo + wt * hi;
}

PdeSolution solve_on(const ProblemFunctions& problem, const ModelSpec& spec, double theta,
                     VolatilityMode mode, const PdeDomain& dom, int n_y, int n_t, double riccati_dt) {
  if (n_y < 5) throw PdeError("the PDE grid needs at least 5 y nodes");
  if (n_t < 1) throw PdeError("the PDE grid needs at least one time step");
  if (!(dom.y_min < dom.y_max)) throw PdeError("empty PDE domain");

  PdeSolution sol;
  sol.theta = theta;
  sol.mode = mode;
  sol.epsilon = mode == VolatilityMode::Epsilon ? spec.epsilon : 0.0;
  const Index J = n_y, N = n_t;
  const double h = (dom.y_max - dom.y_min) / static_cast<double>(J - 1);
  const double dt = spec.T / static_cast<double>(N);
  sol.y.resize(J);
  for (Index j = 0; j < J; ++j) sol.y[j] = dom.y_min + h * static_cast<double>(j);
  sol.y[J - 1] = dom.y_max;
  sol.t = uniform_grid(dt, N);
  sol.t[N] = spec.T;
  sol.u.resize(N + 1, J);
  sol.u_y.resize(N + 1, J);

  const Eigen::VectorXd c = pde_volatility(spec, theta, mode, sol.t, riccati_dt);
  const bool nonlinear = problem.F.cu != 0.0 || problem.F.cs != 0.0;

  Eigen::VectorXd u(J);
  for (Index j = 0; j < J; ++j) u[j] = problem.Phi(sol.y[j]);
  sol.u.row(N) = u.transpose();
  sol.u_y.row(N) = central_y(u, h).transpose();

  const Index m = J - 2;
  Eigen::VectorXd lower(m), diag(m), upper(m), rhs(m), base(m), v(J), v_next(J);

  auto driver = [&](double t, double cvol, const Eigen::VectorXd& w, Index j, const Eigen::VectorXd& wy) {
    return problem.F(t, sol.y[j], w[j], cvol * wy[j]);
  };

  for (Index n = N; n >= 1; --n) {
    const double t_hi = sol.t[n], t_lo = sol.t[n - 1];
    const double a_hi = spec.a(t_hi), a_lo = spec.a(t_lo);
    const double c2_hi = c[n] * c[n], c2_lo = c[n - 1] * c[n - 1];
    const Eigen::VectorXd u_y_hi = central_y(u, h);

    // explicit half: u + ½dt (L u + F) at t_hi
    for (Index j = 1; j + 1 < J; ++j) {
      const double y = sol.y[j];
      const double l = 0.5 * c2_hi / (h * h) + a_hi * y / (2.0 * h);
      const double r = 0.5 * c2_hi / (h * h) - a_hi * y / (2.0 * h);
      const double Lu = l * u[j - 1] - c2_hi / (h * h) * u[j] + r * u[j + 1];
      base[j - 1] = u[j] + 0.5 * dt * (Lu + driver(t_hi, c[n], u, j, u_y_hi));
    }
    // implicit half at t_lo, walls eliminated through u_0 = 2u_1 - u_2
    for (Index j = 1; j + 1 < J; ++j) {
      const double y = sol.y[j];
      const double l = 0.5 * c2_lo / (h * h) + a_lo * y / (2.0 * h);
      const double r = 0.5 * c2_lo / (h * h) - a_lo * y / (2.0 * h);
      lower[j - 1] = -0.5 * dt * l;
      diag[j - 1] = 1.0 + 0.5 * dt * c2_lo / (h * h);
      upper[j - 1] = -0.5 * dt * r;
    }
    diag[0] += 2.0 * lower[0];
    upper[0] -= lower[0];
    diag[m - 1] += 2.0 * upper[m - 1];
    lower[m - 1] -= upper[m - 1];

    v = u;
    int it = 0;
    for (;;) {
      ++it;
      const Eigen::VectorXd v_y = central_y(v, h);
      for (Index j = 1; j + 1 < J; ++j) rhs[j - 1] = base[j - 1] + 0.5 * dt * driver(t_lo, c[n - 1], v, j, v_y);
      solve_tridiagonal(lower, diag, upper, rhs);
      v_next.segment(1, m) = rhs;
      v_next[0] = 2.0 * v_next[1] - v_next[2];
      v_next[J - 1] = 2.0 * v_next[J - 2] - v_next[J - 3];
      if (!v_next.allFinite()) throw PdeError("non-finite PDE solution");
      const double diff = (v_next - v).cwiseAbs().maxCoeff();
      v.swap(v_next);
      if (!nonlinear) break;
      if (diff <= 1e-10 * std::max(1.0, v.cwiseAbs().maxCoeff())) break;
      if (it >= 50) {
        std::ostringstream os;
        os << "Picard iteration did not converge at t = " << t_lo
           << "; the driver's Lipschitz constant is too large for the time step";
        throw PdeError(os.str());
      }
    }
    sol.max_picard_iterations = std::max(sol.max_picard_iterations, it);
    u = v;
    sol.u.row(n - 1) = u.transpose();
    sol.u_y.row(n - 1) = central_y(u, h).transpose();
  }
  return sol;
}

}  // namespace

PdeDomain pde_domain(const ModelSpec& spec, const PdeGridConfig& grid, double k) {
  if (grid.has_domain()) return {grid.y_min, grid.y_max};
  // Var(Y_t) solves v' = -2a v + b², v(0) = 0
  const int steps = 2000;
  const double dt = spec.T / steps;
  double max_var = 0.0;
  for (double theta : {spec.theta_lo, spec.theta_hi}) {
    auto rhs = [&](double t, double v) {
      const double b = spec.b(theta, t);
      return -2.0 * spec.a(t) * v + b * b;
    };
    double v = 0.0;
    for (int n = 0; n < steps; ++n) {
      const double t = n * dt;
      const double k1 = rhs(t, v), k2 = rhs(t + dt / 2, v + dt / 2 * k1);
      const double k3 = rhs(t + dt / 2, v + dt / 2 * k2), k4 = rhs(t + dt, v + dt * k3);
      v += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      max_var = std::max(max_var, v);
    }
  }
  const double half = k * std::sqrt(max_var);
  if (!(half > 0.0)) throw PdeError("cannot derive a PDE domain from a zero-variance model");
  return {spec.y0 - half, spec.y0 + half};
}

Eigen::VectorXd pde_volatility(const ModelSpec& spec, double theta, VolatilityMode mode,
                               const Eigen::VectorXd& t, double riccati_dt) {
  Eigen::VectorXd c(t.size());
  if (mode == VolatilityMode::Limit) {
    for (Index n = 0; n < t.size(); ++n) c[n] = spec.b(theta, t[n]);
    return c;
  }
  const RiccatiTrajectory r = solve_riccati(spec, theta, riccati_dt);
  const Index last = r.t.size() - 1;
  for (Index n = 0; n < t.size(); ++n) {
    const double s = t[n] / riccati_dt;
    Index i = std::clamp<Index>(static_cast<Index>(std::floor(s)), 0, last - 1);
    const double w = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
    const double gs = (1.0 - w) * r.gamma_star[i] + w * r.gamma_star[i + 1];
    c[n] = gs * spec.f(t[n]) / spec.sigma(t[n]);
  }
  return c;
}

PdeSolution solve_pde(const ProblemFunctions& problem, const ModelSpec& spec, double theta,
                      VolatilityMode mode, const PdeGridConfig& grid, double riccati_dt) {
  const PdeDomain dom = pde_domain(spec, grid);
  if (!(dom.y_min < spec.y0 && spec.y0 < dom.y_max)) throw PdeError("PDE domain must contain y0");
  return solve_on(problem, spec, theta, mode, dom, grid.n_y, grid.n_t, riccati_dt);
}

double eval_u(const PdeSolution& sol, double t, double y) { return bilinear(sol, sol.u, t, y); }
double eval_u_y(const PdeSolution& sol, double t, double y) { return bilinear(sol, sol.u_y, t, y); }

double boundary_influence(const ProblemFunctions& problem, const ModelSpec& spec, double theta,
                          VolatilityMode mode, const PdeGridConfig& grid, double riccati_dt) {
  const PdeDomain dom = pde_domain(spec, grid);
  const PdeSolution base = solve_on(problem, spec, theta, mode, dom, grid.n_y, grid.n_t, riccati_dt);
  const double h = (dom.y_max - dom.y_min) / (grid.n_y - 1);
  const int extra = (grid.n_y) / 2;  // about half the width on each side, at equal spacing
  const PdeDomain wide{dom.y_min - extra * h, dom.y_max + extra * h};
  const PdeSolution big =
      solve_on(problem, spec, theta, mode, wide, grid.n_y + 2 * extra, grid.n_t, riccati_dt);
  const double centre = 0.5 * (dom.y_min + dom.y_max), quarter = 0.25 * (dom.y_max - dom.y_min);
  double worst = 0.0;
  for (Index j = 0; j < base.y.size(); ++j) {
    if (std::abs(base.y[j] - centre) > quarter) continue;
    worst = std::max(worst, (base.u.col(j) - big.u.col(j + extra)).cwiseAbs().maxCoeff());
  }
  return worst;
}

Eigen::VectorXd theta_nodes(const ModelSpec& spec, int n) {
  Eigen::VectorXd th(n);
  for (int i = 0; i < n; ++i) th[i] = spec.theta_lo + (spec.theta_hi - spec.theta_lo) * i / (n - 1);
  th[n - 1] = spec.theta_hi;
  return th;
}

PdeFamily theta_family(const ProblemFunctions& problem, const ModelSpec& spec, VolatilityMode mode,
                       const Eigen::VectorXd& thetas, const PdeGridConfig& grid, double riccati_dt) {
  const Index n = thetas.size();
  if (n < 3) throw PdeError("need ≥ 3 nodes for central difference");
  for (Index i = 1; i < n; ++i)
    if (!(thetas[i] > thetas[i - 1])) throw PdeError("θ nodes must increase");
  PdeFamily fam;
  fam.thetas = thetas;
  fam.nodes.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    fam.nodes[i] = solve_pde(problem, spec, thetas[static_cast<Index>(i)], mode, grid, riccati_dt);
  });
  fam.u_dot.resize(static_cast<std::size_t>(n));
  auto U = [&](Index i) -> const Eigen::MatrixXd& { return fam.nodes[static_cast<std::size_t>(i)].u; };
  for (Index i = 0; i < n; ++i) {
    // three-point Lagrange derivative; central at interior nodes
    const Index c = std::clamp<Index>(i, 1, n - 2);
    const double x0 = thetas[c - 1], x1 = thetas[c], x2 = thetas[c + 1], x = thetas[i];
    const double w0 = (2 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
    const double w1 = (2 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
    const double w2 = (2 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
    fam.u_dot[static_cast<std::size_t>(i)] = w0 * U(c - 1) + w1 * U(c) + w2 * U(c + 1);
  }
  return fam;
}

namespace {

template <class Fn>
double along_theta(const PdeFamily& fam, double theta, Fn&& at_node) {
  const Index n = fam.thetas.size();
  const double lo = fam.thetas[0], hi = fam.thetas[n - 1];
  const double tol = 1e-12 * (hi - lo);
  if (theta < lo - tol || theta > hi + tol) throw PdeError("θ outside the PDE family nodes");
  Index i = static_cast<Index>(std::upper_bound(fam.thetas.data(), fam.thetas.data() + n, theta) -
                               fam.thetas.data()) - 1;
  i = std::clamp<Index>(i, 0, n - 2);
  const double w = std::clamp((theta - fam.thetas[i]) / (fam.thetas[i + 1] - fam.thetas[i]), 0.0, 1.0);
  if (w == 0.0) return at_node(i);
  if (w == 1.0) return at_node(i + 1);
  return (1.0 - w) * at_node(i) + w * at_node(i + 1);
}

}  // namespace

double eval_u(const PdeFamily& fam, double t, double y, double theta) {
  return along_theta(fam, theta, [&](Index i) { return eval_u(fam.nodes[static_cast<std::size_t>(i)], t, y); });
}

double eval_u_y(const PdeFamily& fam, double t, double y, double theta) {
  return along_theta(fam, theta, [&](Index i) { return eval_u_y(fam.nodes[static_cast<std::size_t>(i)], t, y); });
}

double eval_u_dot(const PdeFamily& fam, double t, double y, double theta) {
  return along_theta(fam, theta, [&](Index i) {
    const auto& s = fam.nodes[static_cast<std::size_t>(i)];
    return bilinear(s, fam.u_dot[static_cast<std::size_t>(i)], t, y);
  });
}

}  // namespace hbsde
