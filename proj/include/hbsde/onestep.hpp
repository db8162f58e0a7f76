#pragma once

#include <Eigen/Core>

#include "hbsde/kalman.hpp"
#include "hbsde/model.hpp"
#include "hbsde/sde_sim.hpp"

namespace hbsde {

// One-step MLE-process on (τ, T]. Arrays are aligned with the full path grid;
// entries at or before τ, and entries whose information is below 1e-12, are
// marked invalid.
struct EstimatorTrajectory {
  Eigen::VectorXd t;
  Eigen::VectorXd theta_star;  // unclamped
  Eigen::VectorXd info;        // I_τ^t(θ̂)
  Eigen::VectorXd score;       // ∫_τ^t f ṁ/(εσ²)[dX - f m ds]
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;
  Index k_tau = 0;
  double preliminary = 0.0;
  double m_tau = 0.0;          // m(θ̂, τ), the adaptive filter's initial value
  int filter_runs = 0;

  double lo = 0.0, hi = 0.0;   // parameter interval for the clamped accessor
  double clamped(Index k) const;
};

EstimatorTrajectory onestep_process(const ModelSpec& spec, const SamplePath& x_path, double theta_prelim);

// Same, reusing a Riccati solution at θ̂ that covers the path.
EstimatorTrajectory onestep_process(const ModelSpec& spec, const SamplePath& x_path,
                                    const RiccatiTrajectory& riccati_at_prelim);

// η_t = (θ*_t - θ0)/√ε on the valid entries (zero elsewhere).
SamplePath normalized_error(const EstimatorTrajectory& traj, double theta0, double epsilon);

}  // namespace hbsde
