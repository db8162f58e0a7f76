#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hbsde/config_text.hpp"

namespace hbsde {

using Eigen::Index;

// Known coefficient of time: a constant, a polynomial in t, or a table of
// (t, value) pairs with linear interpolation (held constant outside the table).
class TimeFunction {
 public:
  enum class Kind { Constant, Polynomial, Tabulated };

  static TimeFunction constant(double c);
  static TimeFunction polynomial(std::vector<double> coeffs);
  static TimeFunction tabulated(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const TimeFunction&) const = default;

 private:
  Kind kind_ = Kind::Constant;
  std::vector<double> coeffs_{0.0};
  std::vector<double> times_;
  std::vector<double> values_;
};

// Volatility b(θ,t) of the hidden state and its θ-derivatives.
// 
// `theta_scaled` is θ^power · p(t) with p a polynomial in t; its derivatives are
// analytic. `tabulated` interpolates bilinearly on a (θ,t) table and differentiates
// in θ by central differences with the step set through `set_difference_step`.
class VolatilityFunction {
 public:
  enum class Kind { ThetaScaled, Tabulated };

  static VolatilityFunction theta_scaled(std::vector<double> poly, double power = 1.0);
  static VolatilityFunction tabulated(std::vector<double> thetas, std::vector<double> times,
                                      std::vector<double> values_row_major);

  double operator()(double theta, double t) const;
  double d_theta(double theta, double t) const;
  double d_theta2(double theta, double t) const;

  void set_difference_step(double h) { h_theta_ = h; }

  Kind kind() const { return kind_; }
  double power() const { return power_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  const std::vector<double>& thetas() const { return thetas_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const VolatilityFunction& o) const {
    return kind_ == o.kind_ && power_ == o.power_ && coeffs_ == o.coeffs_ &&
           thetas_ == o.thetas_ && times_ == o.times_ && values_ == o.values_;
  }

 private:
  double poly(double t) const;
  double table(double theta, double t) const;

  Kind kind_ = Kind::ThetaScaled;
  double power_ = 1.0;
  std::vector<double> coeffs_{1.0};
  std::vector<double> thetas_, times_, values_;
  double h_theta_ = 1e-4;
};

// Hidden linear state dY = -a Y dt + b(θ,t) dV observed through
// dX = f Y dt + ε σ dW on [0, T], with θ in (theta_lo, theta_hi).
struct ModelSpec {
  TimeFunction a = TimeFunction::constant(1.0);
  VolatilityFunction b = VolatilityFunction::theta_scaled({1.0});
  TimeFunction f = TimeFunction::constant(1.0);
  TimeFunction sigma = TimeFunction::constant(1.0);
  double theta_lo = 0.5;
  double theta_hi = 2.0;
  double T = 1.0;
  double tau = 0.25;
  double epsilon = 0.1;
  double y0 = 0.0;

  // Throws ConfigError naming the violated condition.
  void validate() const;

  ModelSpec with_epsilon(double eps) const {
    ModelSpec s = *this;
    s.epsilon = eps;
    return s;
  }
  bool contains(double theta) const { return theta > theta_lo && theta < theta_hi; }
  double clamp(double theta) const;

  bool operator==(const ModelSpec&) const = default;
};

// The reference model used throughout the tests: a = f = σ = 1, b = θ,
// Θ = (0.5, 2), T = 1, τ = 0.25, y0 = 0.
ModelSpec canonical_model(double epsilon = 0.1);

// Coefficients a, f, σ sampled on a uniform grid and at its midpoints (for RK4).
struct CoefficientGrid {
  double dt = 0.0;
  Index steps = 0;
  Eigen::VectorXd a, f, sigma;              // size steps + 1
  Eigen::VectorXd a_mid, f_mid, sigma_mid;  // size steps
};

CoefficientGrid sample_coefficients(const ModelSpec& spec, double dt, Index steps);

// Number of steps of size dt covering [0, t]; throws if dt does not divide t.
Index steps_for(double t, double dt);

// Integrand f ḃ² / (2 b σ) of the Fisher information.
double fisher_density(const ModelSpec& spec, double theta, double t);

// ---------------------------------------------------------------------------
// BSDE problem functions

// Driver F(t, y, u, s) = c0 + cy·y + cu·u + g(s), with g(s) = cs·s (linear)
// or cs·tanh(s) (tanh). `zero` is the linear driver with all coefficients 0.
struct Driver {
  enum class Kind { Linear, Tanh };
  Kind kind = Kind::Linear;
  double c0 = 0.0, cy = 0.0, cu = 0.0, cs = 0.0;

  static Driver zero() { return {}; }
  double operator()(double t, double y, double u, double s) const;
  bool is_zero() const { return c0 == 0.0 && cy == 0.0 && cu == 0.0 && cs == 0.0; }
  bool operator==(const Driver&) const = default;
};

// Terminal map Φ(y): polynomial in y, or amplitude·cos(frequency·y).
struct Terminal {
  enum class Kind { Polynomial, Cosine };
  Kind kind = Kind::Polynomial;
  std::vector<double> coeffs{0.0, 1.0};
  double amplitude = 1.0, frequency = 1.0;

  static Terminal polynomial(std::vector<double> c) { return {Kind::Polynomial, std::move(c)}; }
  static Terminal cosine(double amp, double freq) { return {Kind::Cosine, {}, amp, freq}; }
  double operator()(double y) const;
  bool operator==(const Terminal&) const = default;
};

struct ProblemFunctions {
  Driver F;
  Terminal Phi;
  double growth_p = 1.0;   // p in |F| + |Φ| <= C (1 + |y|^p); recorded, not enforced beyond sampling
  double lipschitz = 1.0;  // configured L for the sampled Lipschitz check

  bool operator==(const ProblemFunctions&) const = default;
};

struct ProblemReport {
  double lipschitz_estimate = 0.0;
  double growth_constant = 0.0;
  bool lipschitz_pass = false;
};

// Sampled check of |F(.,u1,s1) - F(.,u2,s2)| <= L(|u1-u2| + |s1-s2|) on a box
// and of the polynomial growth bound.
ProblemReport check_problem(const ProblemFunctions& problem, double T, double y_abs, double box,
                            int n = 9);

// ---------------------------------------------------------------------------
// Experiment configuration

struct PdeGridConfig {
  double y_min = std::numeric_limits<double>::quiet_NaN();  // NaN: derived from the model
  double y_max = std::numeric_limits<double>::quiet_NaN();
  int n_y = 401;
  int n_t = 400;

  bool has_domain() const { return y_min == y_min && y_max == y_max; }
  bool operator==(const PdeGridConfig& o) const;
};

struct ExperimentConfig {
  ModelSpec model;
  ProblemFunctions problem;
  double grid_dt = 1e-4;
  PdeGridConfig pde_grid;
  int theta_grid_n = 41;
  double bandwidth_exponent = 1.0;
  double bandwidth_scale = 1.5;
  int mc_replicates = 1;
  std::uint64_t seed = 1;
  double theta0 = 1.0;  // true parameter for simulation studies
  double t0 = 0.1;      // start of the window where filter limits are read

  void validate() const;
  bool operator==(const ExperimentConfig&) const;
};

// Parses a `key = value` document with `[table]` headers. See README for the schema.
ExperimentConfig load_config(const std::string& text);

// Reads a file and applies the HBSDE_SEED environment override.
ExperimentConfig load_config_file(const std::string& path);

// Replaces the seed with HBSDE_SEED when that variable is set.
void apply_seed_environment(ExperimentConfig& config);

std::string serialize_config(const ExperimentConfig& config);

// The experiment configuration used by the test suites (canonical model,
// Φ(y) = y², F = 0).
ExperimentConfig canonical_config(double epsilon = 0.01);

// ---------------------------------------------------------------------------
// Regularity conditions

struct ConditionsReport {
  double min_b = 0.0, min_f = 0.0, min_sigma = 0.0;
  bool finite = false;  // every sampled coefficient is finite
  bool positivity_pass = false;
  double max_derivative_gap = 0.0;  // |central difference of b in θ - b_dθ|
  Eigen::VectorXd theta_grid;
  Eigen::VectorXd fisher;  // I^τ(θ) on theta_grid
  double min_fisher = 0.0;
  bool fisher_pass = false;

  bool all_pass() const { return finite && positivity_pass && fisher_pass; }
};

ConditionsReport validate_conditions(const ModelSpec& spec, int n_check);

}  // namespace hbsde
