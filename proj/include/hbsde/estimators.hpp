#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "hbsde/kalman.hpp"
#include "hbsde/model.hpp"
#include "hbsde/sde_sim.hpp"

namespace hbsde {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Log-likelihood ratio on the learning interval [0, τ]:
// Σ f m/(ε²σ²) ΔX - (f m)²/(2ε²σ²) dt with left-point sums.
double log_likelihood(const ModelSpec& spec, const SamplePath& x_path, double theta);
double log_likelihood(const ModelSpec& spec, const SamplePath& x_path, const RiccatiTrajectory& riccati);

struct LikelihoodCurve {
  Eigen::VectorXd thetas;
  Eigen::VectorXd values;
  double theta_hat = 0.0;
  double ell_hat = 0.0;
  int evaluations = 0;
  bool flat = false;  // grid values all equal; θ̂ is the grid argmax
};

// Grid scan over n_grid nodes of [α, β] and golden-section refinement to
// 1e-4(β - α). Grid Riccati solves are taken from `table` when given.
LikelihoodCurve mle_preliminary(const ModelSpec& spec, const SamplePath& x_path, int n_grid,
                                const RiccatiTable* table = nullptr);

// ∫ f ḃ²/(2bσ) ds over [t_from, t_to] by the trapezoidal rule.
double fisher_information(const ModelSpec& spec, double theta, double t_from, double t_to,
                          int nodes = 2001);

// I_{t_k0}^{t_k} for every grid index k >= k0 (zero before), trapezoidal on the grid.
Eigen::VectorXd fisher_cumulative(const ModelSpec& spec, double theta, const Eigen::VectorXd& t, Index k0);

// K* (support [-1, 0]) looks back from t, K (support [0, 1]) looks forward.
enum class KernelSide { Backward, Forward };

// Discrete triangular weights on L cells, normalized to sum to one.
Eigen::VectorXd kernel_weights(Index L, KernelSide side);

// (1/φ)∫K((s - t)/φ) dX_s with left-point sums; the window must lie in [0, t_end]
// (t_end < 0 means the end of the path).
double kernel_smooth(const SamplePath& x_path, double t, double phi, KernelSide side, double t_end = -1.0);

// Ψ(θ) = ∫_0^τ f² b² dt.
double psi_function(const ModelSpec& spec, double theta);

// Where Ψ̂ falls relative to [Ψ(α), Ψ(β)].
enum class SubstitutionEvent { Below, Inside, Above };

struct PsiInverse {
  double theta = 0.0;
  SubstitutionEvent event = SubstitutionEvent::Inside;
  int iterations = 0;
};

// Clamped inverse of Ψ by bisection to 1e-6(β - α).
PsiInverse invert_psi(const ModelSpec& spec, double psi_hat);

// φ_ε = scale·ε^exponent, capped at τ/2.5.
double substitution_bandwidth(const ModelSpec& spec, double scale, double exponent);

struct SubstitutionPieces {
  double bandwidth = 0.0;
  Index window = 0;                  // cells per kernel window
  double N_bar = 0.0;                // K*-smoothed derivative at τ
  Eigen::VectorXd N;                 // K-smoothed derivative at grid times in [0, τ - φ]
  double psi_hat = 0.0;              // pre-averaged quadratic variation estimate
  double psi_hat_trapezoid = 0.0;    // N̄² - 2∫N dN with trapezoids (diagnostic)
  double noise_correction = 0.0;
  double kernel_factor = 0.0;
  double psi_lo = 0.0, psi_hi = 0.0;  // Ψ(α), Ψ(β)
  SubstitutionEvent event = SubstitutionEvent::Inside;
  double theta_check = 0.0;
};

// Kernel-based substitution estimator on [0, τ].
SubstitutionPieces substitution_estimator(const ModelSpec& spec, const SamplePath& x_path,
                                          double bandwidth_scale, double bandwidth_exponent);

}  // namespace hbsde
