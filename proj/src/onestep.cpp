#include "hbsde/onestep.hpp"

#include <algorithm>
#include <cmath>

#include "hbsde/estimators.hpp"

namespace hbsde {

double EstimatorTrajectory::clamped(Index k) const { return std::clamp(theta_star[k], lo, hi); }

EstimatorTrajectory onestep_process(const ModelSpec& spec, const SamplePath& x_path,
                                    const RiccatiTrajectory& riccati) {
  const double theta = riccati.theta;
  if (theta < spec.theta_lo || theta > spec.theta_hi)
    throw EstimationError("preliminary estimate outside the parameter interval");
  const Index n = x_path.size();
  const double dt = x_path.dt();
  const Index kt = steps_for(spec.tau, dt);
  if (kt >= n - 1) throw EstimationError("observation path does not extend beyond τ");

  const FilterTrajectory F = run_filter(spec, riccati, x_path);

  EstimatorTrajectory E;
  E.t = x_path.t;
  E.k_tau = kt;
  E.preliminary = theta;
  E.m_tau = F.m[kt];
  E.filter_runs = 1;
  E.lo = spec.theta_lo;
  E.hi = spec.theta_hi;
  E.info = fisher_cumulative(spec, theta, x_path.t, kt);
  E.score = Eigen::VectorXd::Zero(n);
  E.theta_star = Eigen::VectorXd::Constant(n, theta);
  E.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false);

  const double eps = spec.epsilon;
  double acc = 0.0;
  for (Index k = kt; k + 1 < n; ++k) {
    const double t = x_path.t[k];
    const double f = spec.f(t), s = spec.sigma(t);
    const double dX = x_path.v[k + 1] - x_path.v[k];
    acc += f * F.m_dtheta[k] / (eps * s * s) * (dX - f * F.m[k] * dt);
    E.score[k + 1] = acc;
    if (E.info[k + 1] >= 1e-12) {
      E.theta_star[k + 1] = theta + acc / E.info[k + 1];
      E.valid[k + 1] = true;
    }
  }
  return E;
}

EstimatorTrajectory onestep_process(const ModelSpec& spec, const SamplePath& x_path, double theta_prelim) {
  const Index steps = x_path.size() - 1;
  return onestep_process(spec, x_path, solve_riccati(spec, theta_prelim, x_path.dt(), steps));
}

SamplePath normalized_error(const EstimatorTrajectory& traj, double theta0, double epsilon) {
  SamplePath eta;
  eta.kind = PathKind::Diagnostic;
  eta.t = traj.t;
  eta.v = Eigen::VectorXd::Zero(traj.t.size());
  const double s = std::sqrt(epsilon);
  for (Index k = 0; k < traj.t.size(); ++k)
    if (traj.valid[k]) eta.v[k] = (traj.theta_star[k] - theta0) / s;
  return eta;
}

}  // namespace hbsde
