#include "hbsde/kalman.hpp"

#include <atomic>
#include <cmath>

namespace hbsde {

namespace {

std::atomic<std::uint64_t> g_filter_runs{0};

}  // namespace

RiccatiTrajectory solve_riccati(const ModelSpec& spec, double theta, double dt, Index steps) {
  RiccatiTrajectory r;
  r.theta = theta;
  r.epsilon = spec.epsilon;
  r.t = uniform_grid(dt, steps);
  r.gamma.resize(steps + 1);
  r.gamma_dtheta.resize(steps + 1);
  const double e2 = spec.epsilon * spec.epsilon;

  // (γ, γ̇)' at time t
  auto rhs = [&](double t, double g, double gd, double& dg, double& dgd) {
    const double a = spec.a(t), f = spec.f(t), s = spec.sigma(t);
    const double b = spec.b(theta, t), bd = spec.b.d_theta(theta, t);
    const double k = f * f / (e2 * s * s);
    dg = -2.0 * a * g - g * g * k + b * b;
    dgd = -2.0 * a * gd - 2.0 * g * gd * k + 2.0 * b * bd;
  };

  double g = 0.0, gd = 0.0;
  r.gamma[0] = 0.0;
  r.gamma_dtheta[0] = 0.0;
  for (Index n = 0; n < steps; ++n) {
    const double t = r.t[n];
    double k1, l1, k2, l2, k3, l3, k4, l4;
    rhs(t, g, gd, k1, l1);
    rhs(t + 0.5 * dt, g + 0.5 * dt * k1, gd + 0.5 * dt * l1, k2, l2);
    rhs(t + 0.5 * dt, g + 0.5 * dt * k2, gd + 0.5 * dt * l2, k3, l3);
    rhs(t + dt, g + dt * k3, gd + dt * l3, k4, l4);
    g += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    gd += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    if (!std::isfinite(g) || !std::isfinite(gd))
      throw SimulationError("non-finite Riccati solution; time step too large for ε");
    r.gamma[n + 1] = g;
    r.gamma_dtheta[n + 1] = gd;
  }
  r.gamma_star = r.gamma / spec.epsilon;
  return r;
}

RiccatiTrajectory solve_riccati(const ModelSpec& spec, double theta, double dt) {
  return solve_riccati(spec, theta, dt, steps_for(spec.T, dt));
}

std::uint64_t filter_run_count() { return g_filter_runs.load(); }

FilterTrajectory run_filter(const ModelSpec& spec, const RiccatiTrajectory& riccati,
                            const SamplePath& x_path) {
  const Index n = x_path.size();
  if (riccati.t.size() < n) throw SimulationError("filter: Riccati grid shorter than the path");
  require_same_grid(riccati.t.head(n), x_path.t, "filter");
  ++g_filter_runs;

  FilterTrajectory F;
  F.theta = riccati.theta;
  F.epsilon = spec.epsilon;
  F.t = x_path.t;
  F.gamma = riccati.gamma.head(n);
  F.m.resize(n);
  F.m_dtheta.resize(n);
  F.A_eps.resize(n);
  F.q_eps.resize(n);
  F.B_eps.resize(n);

  const double eps = spec.epsilon, e2 = eps * eps;
  const double dt = x_path.dt();
  double m = spec.y0, md = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double t = F.t[k];
    const double a = spec.a(t), f = spec.f(t), s = spec.sigma(t);
    const double g = riccati.gamma[k], gd = riccati.gamma_dtheta[k];
    F.A_eps[k] = riccati.gamma_star[k] * f / (s * s);
    F.q_eps[k] = a + F.A_eps[k] * f / eps;
    F.B_eps[k] = F.A_eps[k] * s;
    F.m[k] = m;
    F.m_dtheta[k] = md;
    if (k + 1 == n) break;
    const double dX = x_path.v[k + 1] - x_path.v[k];
    const double c = f / (e2 * s * s);
    const double q = a + g * f * c;
    const double m_next = m - q * m * dt + g * c * dX;
    md = md - q * md * dt - gd * f * c * m * dt + gd * c * dX;
    m = m_next;
    if (!std::isfinite(m) || !std::isfinite(md)) throw SimulationError("non-finite filter state");
  }
  return F;
}

SamplePath innovation(const ModelSpec& spec, const FilterTrajectory& filter, const SamplePath& x_path) {
  require_same_grid(filter.t, x_path.t, "innovation");
  SamplePath w;
  w.kind = PathKind::Innovation;
  w.t = x_path.t;
  w.v = Eigen::VectorXd::Zero(x_path.size());
  if (spec.epsilon == 0.0) return w;
  const double dt = x_path.dt();
  for (Index k = 0; k + 1 < x_path.size(); ++k) {
    const double t = w.t[k];
    const double dX = x_path.v[k + 1] - x_path.v[k];
    w.v[k + 1] = w.v[k] + (dX - spec.f(t) * filter.m[k] * dt) / (spec.epsilon * spec.sigma(t));
  }
  return w;
}

LimitCoefficients limit_coefficients(const ModelSpec& spec, double theta, const Eigen::VectorXd& t) {
  LimitCoefficients c;
  c.gamma0.resize(t.size());
  c.A0.resize(t.size());
  for (Index k = 0; k < t.size(); ++k) {
    const double b = spec.b(theta, t[k]), s = spec.sigma(t[k]);
    c.gamma0[k] = b * s / spec.f(t[k]);
    c.A0[k] = b / s;
  }
  return c;
}

double lemma1_gap(const ModelSpec& spec, const RiccatiTrajectory& r, double t0) {
  double gap = 0.0;
  for (Index k = 0; k < r.t.size(); ++k) {
    if (r.t[k] < t0 - 1e-12) continue;
    const double t = r.t[k];
    gap = std::max(gap, std::abs(r.gamma_star[k] - spec.b(r.theta, t) * spec.sigma(t) / spec.f(t)));
  }
  return gap;
}

RiccatiTable::RiccatiTable(const ModelSpec& spec, int n_theta, double dt, Index steps)
    : steps_(steps) {
  if (n_theta < 2) throw ConfigError("Riccati table needs at least two θ nodes");
  thetas_.resize(n_theta);
  for (int i = 0; i < n_theta; ++i)
    thetas_[i] = spec.theta_lo + (spec.theta_hi - spec.theta_lo) * i / (n_theta - 1);
  thetas_[n_theta - 1] = spec.theta_hi;
  nodes_.reserve(static_cast<std::size_t>(n_theta));
  for (int i = 0; i < n_theta; ++i) nodes_.push_back(solve_riccati(spec, thetas_[i], dt, steps));
}

int RiccatiTable::node_index(double theta) const {
  for (Index i = 0; i < thetas_.size(); ++i)
    if (thetas_[i] == theta) return static_cast<int>(i);
  return -1;
}

double RiccatiTable::gamma_star(double theta, Index k) const {
  const Index n = thetas_.size();
  if (theta < thetas_[0] || theta > thetas_[n - 1])
    throw SimulationError("Riccati table query outside the parameter interval");
  const double h = (thetas_[n - 1] - thetas_[0]) / static_cast<double>(n - 1);
  Index i = std::min<Index>(static_cast<Index>((theta - thetas_[0]) / h), n - 2);
  const double w = (theta - thetas_[i]) / (thetas_[i + 1] - thetas_[i]);
  const auto& lo = nodes_[static_cast<std::size_t>(i)].gamma_star;
  const auto& hi = nodes_[static_cast<std::size_t>(i + 1)].gamma_star;
  if (w == 0.0) return lo[k];
  return (1.0 - w) * lo[k] + w * hi[k];
}

FilterTrajectory discrete_kalman_oracle(const ModelSpec& spec, double theta, const SamplePath& x_path) {
  const Index n = x_path.size();
  const double dt = x_path.dt();
  const double e2 = spec.epsilon * spec.epsilon;
  FilterTrajectory F;
  F.theta = theta;
  F.epsilon = spec.epsilon;
  F.t = x_path.t;
  F.m.resize(n);
  F.gamma.resize(n);
  F.m_dtheta = Eigen::VectorXd::Zero(n);
  F.A_eps.resize(n);
  F.q_eps.resize(n);
  F.B_eps.resize(n);

  double m = spec.y0, P = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double t = F.t[k];
    const double a = spec.a(t), f = spec.f(t), s = spec.sigma(t), b = spec.b(theta, t);
    F.m[k] = m;
    F.gamma[k] = P;
    F.A_eps[k] = P / spec.epsilon * f / (s * s);
    F.q_eps[k] = a + F.A_eps[k] * f / spec.epsilon;
    F.B_eps[k] = F.A_eps[k] * s;
    if (k + 1 == n) break;
    // update with ΔX_k = f Y_k dt + εσ ΔW_k, then propagate Y_{k+1} = (1 - a dt) Y_k + b ΔV_k
    const double dX = x_path.v[k + 1] - x_path.v[k];
    const double h = f * dt;
    const double S = h * h * P + e2 * s * s * dt;
    const double K = P * h / S;
    const double m_post = m + K * (dX - h * m);
    const double P_post = P - K * h * P;
    const double phi = 1.0 - a * dt;
    m = phi * m_post;
    P = phi * phi * P_post + b * b * dt;
  }
  return F;
}

}  // namespace hbsde
