#include "hbsde/bsde_approx.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "hbsde/estimators.hpp"
#include "hbsde/random.hpp"

namespace hbsde {

SamplePath adaptive_filter(const ModelSpec& spec, const SamplePath& x_path,
                           const EstimatorTrajectory& traj, const RiccatiTable& table, double m_init) {
  require_same_grid(traj.t, x_path.t, "adaptive filter");
  const Index kt = traj.k_tau, n = x_path.size();
  if (table.steps() + 1 < n) throw SimulationError("Riccati table shorter than the path");
  const double dt = x_path.dt(), eps = spec.epsilon;
  SamplePath out;
  out.kind = PathKind::Diagnostic;
  out.t = x_path.t.tail(n - kt);
  out.v.resize(n - kt);
  double m = m_init;
  out.v[0] = m;
  for (Index k = kt; k + 1 < n; ++k) {
    const double theta = (k == kt || !traj.valid[k]) ? traj.preliminary : traj.clamped(k);
    const double t = x_path.t[k];
    const double f = spec.f(t), s = spec.sigma(t);
    const double A = table.gamma_star(theta, k) * f / (s * s);
    const double q = spec.a(t) + A * f / eps;
    m = m - q * m * dt + A / eps * (x_path.v[k + 1] - x_path.v[k]);
    if (!std::isfinite(m)) throw SimulationError("non-finite adaptive filter state");
    out.v[k + 1 - kt] = m;
  }
  return out;
}

ApproximationResult approximate(const ModelSpec& spec, const SamplePath& x_path, const PdeFamily& eps_family,
                                const EstimatorTrajectory& traj, const RiccatiTable& table,
                                const ReferenceInputs* ref) {
  const SamplePath mh = adaptive_filter(spec, x_path, traj, table, traj.m_tau);
  const Index kt = traj.k_tau, len = mh.size();
  ApproximationResult R;
  R.epsilon = spec.epsilon;
  R.t = mh.t;
  R.m_hat = mh.v;
  R.theta_used.resize(len);
  R.Z_hat.resize(len);
  R.s_hat.resize(len);

  auto B_eps = [&](double theta, Index k) {
    const double t = x_path.t[k];
    return table.gamma_star(theta, k) * spec.f(t) / spec.sigma(t);
  };
  for (Index i = 0; i < len; ++i) {
    const Index k = kt + i;
    const double theta = (i == 0 || !traj.valid[k]) ? traj.preliminary : traj.clamped(k);
    R.theta_used[i] = theta;
    R.Z_hat[i] = eval_u(eps_family, R.t[i], R.m_hat[i], theta);
    R.s_hat[i] = B_eps(theta, k) * eval_u_y(eps_family, R.t[i], R.m_hat[i], theta);
  }
  if (ref == nullptr) return R;

  const int node = table.node_index(ref->theta0);
  const RiccatiTrajectory r0 = node >= 0 ? table.node(node) : solve_riccati(spec, ref->theta0, x_path.dt(), table.steps());
  const FilterTrajectory F0 = run_filter(spec, r0, x_path);
  R.m_ref = F0.m.tail(len);
  R.Z_ref.resize(len);
  R.s_ref.resize(len);
  R.Z_swap.resize(len);
  for (Index i = 0; i < len; ++i) {
    const Index k = kt + i;
    R.Z_ref[i] = eval_u(eps_family, R.t[i], R.m_ref[i], ref->theta0);
    R.s_ref[i] = F0.B_eps[k] * eval_u_y(eps_family, R.t[i], R.m_ref[i], ref->theta0);
    R.Z_swap[i] = eval_u(eps_family, R.t[i], R.m_ref[i], R.theta_used[i]);
  }
  if (ref->y_path != nullptr && ref->limit_family != nullptr) {
    require_same_grid(ref->y_path->t, x_path.t, "reference hidden path");
    R.Z_limit.resize(len);
    for (Index i = 0; i < len; ++i)
      R.Z_limit[i] = eval_u(*ref->limit_family, R.t[i], ref->y_path->v[kt + i], ref->theta0);
  }
  return R;
}

GaussHermite gauss_hermite(int n) {
  // Golub–Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite g;
  g.nodes = es.eigenvalues();
  g.weights = es.eigenvectors().row(0).transpose().array().square();
  return g;
}

OuMoments ou_moments(const ModelSpec& spec, double theta, double t) {
  OuMoments m{spec.y0, 0.0};
  if (t <= 0.0) return m;
  const int steps = std::max(200, static_cast<int>(std::ceil(t / 5e-4)));
  const double h = t / steps;
  auto rhs = [&](double s, double mean, double var, double& dm, double& dv) {
    const double a = spec.a(s), b = spec.b(theta, s);
    dm = -a * mean;
    dv = -2.0 * a * var + b * b;
  };
  for (int n = 0; n < steps; ++n) {
    const double s = n * h;
    double m1, v1, m2, v2, m3, v3, m4, v4;
    rhs(s, m.mean, m.variance, m1, v1);
    rhs(s + h / 2, m.mean + h / 2 * m1, m.variance + h / 2 * v1, m2, v2);
    rhs(s + h / 2, m.mean + h / 2 * m2, m.variance + h / 2 * v2, m3, v3);
    rhs(s + h, m.mean + h * m3, m.variance + h * v3, m4, v4);
    m.mean += h / 6 * (m1 + 2 * m2 + 2 * m3 + m4);
    m.variance += h / 6 * (v1 + 2 * v2 + 2 * v3 + v4);
  }
  return m;
}

LimitTerms theorem1_limit(const ModelSpec& spec, const PdeFamily& limit_family, double theta0, double t,
                          int nodes) {
  const GaussHermite gh = gauss_hermite(nodes);
  const OuMoments mo = ou_moments(spec, theta0, t);
  const double sd = std::sqrt(mo.variance);
  const double ylo = limit_family.nodes.front().y[0];
  const double yhi = limit_family.nodes.front().y[limit_family.nodes.front().y.size() - 1];
  double ey = 0.0, ed = 0.0;
  for (Index i = 0; i < gh.nodes.size(); ++i) {
    // nodes far in the tails carry negligible weight; clip them to the PDE domain
    const double y = std::clamp(mo.mean + sd * gh.nodes[i], ylo, yhi);
    const double uy = eval_u_y(limit_family, t, y, theta0);
    const double ud = eval_u_dot(limit_family, t, y, theta0);
    ey += gh.weights[i] * uy * uy;
    ed += gh.weights[i] * ud * ud;
  }
  LimitTerms L;
  L.filter_term = spec.b(theta0, t) * spec.sigma(t) / spec.f(t) * ey;
  L.estimator_term = ed / fisher_information(spec, theta0, spec.tau, t);
  return L;
}

namespace {

Index index_of(const Eigen::VectorXd& t, double s) {
  const double dt = t[1] - t[0];
  const Index i = static_cast<Index>(std::llround((s - t[0]) / dt));
  if (i < 0 || i >= t.size() || std::abs(t[i] - s) > 1e-9) throw SimulationError("evaluation time is not on the grid");
  return i;
}

}  // namespace

ReplicateErrors summarize(const ApproximationResult& r, const Eigen::VectorXd& eval_times,
                          const Eigen::VectorXd& gap_times, const Weight& h) {
  if (r.Z_ref.size() == 0) throw SimulationError("error summary needs reference quantities");
  const bool has_limit = r.Z_limit.size() == r.Z_hat.size();
  const double se = std::sqrt(r.epsilon);
  ReplicateErrors e;
  e.pointwise = Eigen::VectorXd::Zero(eval_times.size());
  e.pointwise_ref.resize(eval_times.size());
  e.pointwise_swap = Eigen::VectorXd::Zero(eval_times.size());
  for (Index j = 0; j < eval_times.size(); ++j) {
    const Index i = index_of(r.t, eval_times[j]);
    e.pointwise_ref[j] = (r.Z_hat[i] - r.Z_ref[i]) / se;
    if (has_limit) {
      e.pointwise[j] = (r.Z_hat[i] - r.Z_limit[i]) / se;
      e.pointwise_swap[j] = (r.Z_swap[i] - r.Z_limit[i]) / se;
    }
  }
  // trapezoidal ∫_τ^T h (Ẑ - Z) dt
  const double dt = r.t[1] - r.t[0];
  for (Index i = 0; i < r.t.size(); ++i) {
    const double w = (i == 0 || i + 1 == r.t.size()) ? 0.5 : 1.0;
    const double hv = h(r.t[i]);
    if (hv == 0.0) continue;
    e.integrated_ref += w * hv * (r.Z_hat[i] - r.Z_ref[i]);
    if (has_limit) e.integrated += w * hv * (r.Z_hat[i] - r.Z_limit[i]);
  }
  e.integrated *= dt / se;
  e.integrated_ref *= dt / se;
  e.filter_gap.resize(gap_times.size());
  for (Index j = 0; j < gap_times.size(); ++j) {
    const Index i = index_of(r.t, gap_times[j]);
    const double d = (r.m_hat[i] - r.m_ref[i]) / r.epsilon;
    e.filter_gap[j] = d * d;
  }
  return e;
}

MeanEstimate mean_estimate(const Eigen::VectorXd& x) {
  MeanEstimate m;
  m.n = static_cast<int>(x.size());
  if (m.n == 0) return m;
  m.mean = x.mean();
  m.variance = m.n > 1 ? (x.array() - m.mean).square().sum() / (m.n - 1) : 0.0;
  m.std_error = std::sqrt(m.variance / m.n);
  return m;
}

ErrorDiagnostics error_report(const std::vector<ReplicateErrors>& reps, const PdeFamily& limit_family,
                              const ModelSpec& spec, double theta0, const Eigen::VectorXd& eval_times) {
  if (reps.size() < 2) throw SimulationError("error report needs at least two replicates");
  const Index n = static_cast<Index>(reps.size());
  ErrorDiagnostics d;
  d.eval_times = eval_times;
  for (Index j = 0; j < eval_times.size(); ++j) {
    Eigen::VectorXd a(n), b(n), c(n);
    for (Index r = 0; r < n; ++r) {
      const auto& e = reps[static_cast<std::size_t>(r)];
      a[r] = e.pointwise[j] * e.pointwise[j];
      b[r] = e.pointwise_ref[j] * e.pointwise_ref[j];
      c[r] = e.pointwise_swap[j] * e.pointwise_swap[j];
    }
    d.mse.push_back(mean_estimate(a));
    d.mse_ref.push_back(mean_estimate(b));
    d.mse_swap.push_back(mean_estimate(c));
    d.limits.push_back(theorem1_limit(spec, limit_family, theta0, eval_times[j]));
  }
  Eigen::VectorXd I(n), Iref(n);
  for (Index r = 0; r < n; ++r) {
    I[r] = reps[static_cast<std::size_t>(r)].integrated;
    Iref[r] = reps[static_cast<std::size_t>(r)].integrated_ref;
  }
  d.integrated = mean_estimate(I);
  d.integrated_ref = mean_estimate(Iref);
  const Index g = reps.front().filter_gap.size();
  for (Index j = 0; j < g; ++j) {
    double acc = 0.0;
    for (const auto& e : reps) acc += e.filter_gap[j];
    d.filter_gap_sup = std::max(d.filter_gap_sup, acc / static_cast<double>(n));
  }
  return d;
}

MeanEstimate corollary1_limit(const ModelSpec& spec, const PdeFamily& limit_family, double theta0,
                              const Weight& h, int paths, std::uint64_t seed, double dt) {
  const Index n = steps_for(spec.T, dt), kt = steps_for(spec.tau, dt);
  const Eigen::VectorXd t = uniform_grid(dt, n);
  const Eigen::VectorXd I = fisher_cumulative(spec, theta0, t, kt);
  Eigen::VectorXd dens(n + 1);
  for (Index k = 0; k <= n; ++k) dens[k] = std::sqrt(fisher_density(spec, theta0, t[k]));
  const double ylo = limit_family.nodes.front().y[0];
  const double yhi = limit_family.nodes.front().y[limit_family.nodes.front().y.size() - 1];
  Eigen::VectorXd out(paths);
  for (int p = 0; p < paths; ++p) {
    CounterRng ry(split_seed(seed, 2 * static_cast<std::uint64_t>(p)));
    CounterRng rw(split_seed(seed, 2 * static_cast<std::uint64_t>(p) + 1));
    std::normal_distribution<double> gy, gw;
    const double sd = std::sqrt(dt);
    double y = spec.y0, mart = 0.0, acc = 0.0;
    for (Index k = 0; k < n; ++k) {
      if (k > kt) {
        const double eta = mart / I[k];
        acc += h(t[k]) * eval_u_dot(limit_family, t[k], std::clamp(y, ylo, yhi), theta0) * eta;
      }
      const double dw = sd * gw(rw);
      if (k >= kt) mart += dens[k] * dw;
      y += -spec.a(t[k]) * y * dt + spec.b(theta0, t[k]) * sd * gy(ry);
    }
    // closing endpoint T
    acc += 0.5 * h(t[n]) * eval_u_dot(limit_family, t[n], std::clamp(y, ylo, yhi), theta0) * mart / I[n];
    out[p] = acc * dt;
  }
  return mean_estimate(out);
}

}  // namespace hbsde
