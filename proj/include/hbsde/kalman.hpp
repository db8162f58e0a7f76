#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "hbsde/model.hpp"
#include "hbsde/sde_sim.hpp"

namespace hbsde {

// γ(θ,t) on a uniform grid with γ* = γ/ε and the θ-derivative γ̇.
struct RiccatiTrajectory {
  Eigen::VectorXd t;
  Eigen::VectorXd gamma, gamma_star, gamma_dtheta;
  double theta = 0.0;
  double epsilon = 0.0;

  double dt() const { return t[1] - t[0]; }
};

// Classical RK4 for γ' = -2aγ - γ²f²/(ε²σ²) + b², γ(0) = 0, together with the
// linearized equation for γ̇. Because the tangent system is integrated by the
// same RK4 stages, γ̇ is the exact θ-derivative of the discrete γ.
RiccatiTrajectory solve_riccati(const ModelSpec& spec, double theta, double dt, Index steps);
RiccatiTrajectory solve_riccati(const ModelSpec& spec, double theta, double dt);

// Conditional mean m(θ,t), its sensitivity ṁ and the filter gains.
struct FilterTrajectory {
  Eigen::VectorXd t;
  Eigen::VectorXd m, m_dtheta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd A_eps, q_eps, B_eps;  // γ*f/σ², a + A_ε f/ε, A_ε σ
  double theta = 0.0;
  double epsilon = 0.0;
};

// Euler scheme for the Kalman–Bucy filter and its sensitivity, m(0) = y0.
// The Riccati grid may be longer than the observation path; only its prefix is used.
FilterTrajectory run_filter(const ModelSpec& spec, const RiccatiTrajectory& riccati,
                            const SamplePath& x_path);

// Number of run_filter calls made by this process (instrumentation).
std::uint64_t filter_run_count();

// Innovation W̄ with dW̄ = (dX - f m dt)/(εσ); identically zero when ε = 0.
SamplePath innovation(const ModelSpec& spec, const FilterTrajectory& filter, const SamplePath& x_path);

struct LimitCoefficients {
  Eigen::VectorXd gamma0;  // bσ/f
  Eigen::VectorXd A0;      // b/σ
};

LimitCoefficients limit_coefficients(const ModelSpec& spec, double theta, const Eigen::VectorXd& t);

// sup over t >= t0 of |γ* - bσ/f|.
double lemma1_gap(const ModelSpec& spec, const RiccatiTrajectory& r, double t0);

// Riccati solutions on a uniform θ-grid over [α, β] with linear interpolation in θ.
class RiccatiTable {
 public:
  RiccatiTable(const ModelSpec& spec, int n_theta, double dt, Index steps);

  const Eigen::VectorXd& thetas() const { return thetas_; }
  const RiccatiTrajectory& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  Index steps() const { return steps_; }

  // γ*(θ, t_k); throws if θ lies outside [α, β].
  double gamma_star(double theta, Index k) const;
  // Node index holding θ exactly, or -1.
  int node_index(double theta) const;

 private:
  Eigen::VectorXd thetas_;
  std::vector<RiccatiTrajectory> nodes_;
  Index steps_ = 0;
};

// Exact discrete-time Kalman filter for the Euler-discretized state-space
// model on the path's grid; `gamma` holds the one-step predicted variance.
// Verification oracle.
FilterTrajectory discrete_kalman_oracle(const ModelSpec& spec, double theta, const SamplePath& x_path);

}  // namespace hbsde
