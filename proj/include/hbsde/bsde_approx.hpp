#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "hbsde/kalman.hpp"
#include "hbsde/model.hpp"
#include "hbsde/onestep.hpp"
#include "hbsde/pde.hpp"
#include "hbsde/sde_sim.hpp"

namespace hbsde {

// m̂ on [τ, T] from dm̂ = -q_ε(θ*_t, t) m̂ dt + ε⁻¹A_ε(θ*_t, t) dX with the
// clamped estimate; the first step uses the preliminary estimate.
SamplePath adaptive_filter(const ModelSpec& spec, const SamplePath& x_path,
                           const EstimatorTrajectory& traj, const RiccatiTable& table, double m_init);

// Simulation-mode inputs for the reference quantities.
struct ReferenceInputs {
  double theta0 = 1.0;
  const SamplePath* y_path = nullptr;          // hidden path, for Z_limit
  const PdeFamily* limit_family = nullptr;     // U(t, y, θ), for Z_limit
};

// Arrays on the grid t_k, k = k_τ, ..., N. Reference arrays are empty without ReferenceInputs.
struct ApproximationResult {
  Eigen::VectorXd t;
  Eigen::VectorXd m_hat, theta_used;
  Eigen::VectorXd Z_hat, s_hat;
  Eigen::VectorXd m_ref, Z_ref, s_ref;  // θ0-filter and u(t, m(θ0,t), θ0, ε)
  Eigen::VectorXd Z_swap;               // u(t, m(θ0,t), θ*_t, ε)
  Eigen::VectorXd Z_limit;              // U(t, Y_t, θ0)
  double epsilon = 0.0;
};

ApproximationResult approximate(const ModelSpec& spec, const SamplePath& x_path, const PdeFamily& eps_family,
                                const EstimatorTrajectory& traj, const RiccatiTable& table,
                                const ReferenceInputs* ref = nullptr);

// Nodes and weights of the n-point rule for E[g(Z)], Z ~ N(0, 1).
struct GaussHermite {
  Eigen::VectorXd nodes, weights;
};
GaussHermite gauss_hermite(int n);

// Mean and variance of Y_t under θ.
struct OuMoments {
  double mean = 0.0, variance = 0.0;
};
OuMoments ou_moments(const ModelSpec& spec, double theta, double t);

// (bσ/f) E[U'_y(t,Y_t,θ0)²] + E[U̇(t,Y_t,θ0)²] / I_τ^t(θ0), expectations by Gauss–Hermite.
struct LimitTerms {
  double filter_term = 0.0;
  double estimator_term = 0.0;
  double total() const { return filter_term + estimator_term; }
};
LimitTerms theorem1_limit(const ModelSpec& spec, const PdeFamily& limit_family, double theta0, double t,
                          int nodes = 64);

using Weight = std::function<double(double)>;

// Per-replicate error summary against a chosen reference Z.
struct ReplicateErrors {
  Eigen::VectorXd pointwise;        // (Ẑ - Z_limit)/√ε at the evaluation times
  Eigen::VectorXd pointwise_ref;    // (Ẑ - Z_ref)/√ε
  Eigen::VectorXd pointwise_swap;   // (Z_swap - Z_limit)/√ε
  double integrated = 0.0;          // ε^{-1/2} ∫_τ^T h (Ẑ - Z_limit) dt
  double integrated_ref = 0.0;
  Eigen::VectorXd filter_gap;       // (m̂ - m(θ0))² / ε² at the gap times
};

ReplicateErrors summarize(const ApproximationResult& r, const Eigen::VectorXd& eval_times,
                          const Eigen::VectorXd& gap_times, const Weight& h);

struct MeanEstimate {
  double mean = 0.0, std_error = 0.0, variance = 0.0;
  int n = 0;
};
MeanEstimate mean_estimate(const Eigen::VectorXd& x);

struct ErrorDiagnostics {
  Eigen::VectorXd eval_times;
  std::vector<MeanEstimate> mse;       // ε⁻¹E(Ẑ - Z_limit)²
  std::vector<MeanEstimate> mse_ref;   // ε⁻¹E(Ẑ - Z_ref)²
  std::vector<MeanEstimate> mse_swap;  // ε⁻¹E(Z_swap - Z_limit)²
  std::vector<LimitTerms> limits;
  MeanEstimate integrated, integrated_ref;
  double filter_gap_sup = 0.0;         // sup_t E|m̂ - m(θ0)|²/ε² over the gap times
};

ErrorDiagnostics error_report(const std::vector<ReplicateErrors>& reps, const PdeFamily& limit_family,
                              const ModelSpec& spec, double theta0, const Eigen::VectorXd& eval_times);

// Law of ∫_τ^T h(s) U̇(s,Y_s,θ0) η_s ds with η_s = (∫_τ^s √i dw)/I_τ^s, i the
// Fisher density at θ0, Y an independent OU path at θ0: sample mean and variance.
MeanEstimate corollary1_limit(const ModelSpec& spec, const PdeFamily& limit_family, double theta0,
                              const Weight& h, int paths, std::uint64_t seed, double dt);

}  // namespace hbsde
