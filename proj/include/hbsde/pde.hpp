#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "hbsde/model.hpp"

namespace hbsde {

class PdeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Query outside the truncated y-domain.
class PdeDomainError : public PdeError {
 public:
  using PdeError::PdeError;
};

// Volatility of the backward equation: B_ε = A_ε σ from the Riccati solution
// at the model's ε, or b itself for the limit equation.
enum class VolatilityMode { Epsilon, Limit };

struct PdeDomain {
  double y_min = 0.0, y_max = 0.0;
};

// The configured domain, or y0 ± k·max_t std(Y_t) over both ends of the parameter interval.
PdeDomain pde_domain(const ModelSpec& spec, const PdeGridConfig& grid, double k = 6.0);

// Volatility c(t) on the given times; the Riccati equation is integrated with step riccati_dt.
Eigen::VectorXd pde_volatility(const ModelSpec& spec, double theta, VolatilityMode mode,
                               const Eigen::VectorXd& t, double riccati_dt);

// u on a (t, y) grid; rows are time nodes, columns are y nodes.
struct PdeSolution {
  Eigen::VectorXd t, y;
  Eigen::MatrixXd u, u_y;
  double theta = 0.0;
  double epsilon = 0.0;  // 0 for the limit equation
  VolatilityMode mode = VolatilityMode::Limit;
  int max_picard_iterations = 0;
};

// u_t - a y u_y + ½c²u_yy = -F(t, y, u, c u_y), u(T) = Φ, marched backward by
// Crank–Nicolson with Picard iteration on F and u_yy = 0 at both walls.
PdeSolution solve_pde(const ProblemFunctions& problem, const ModelSpec& spec, double theta,
                      VolatilityMode mode, const PdeGridConfig& grid, double riccati_dt = 1e-4);

// Bilinear interpolation; throws PdeDomainError outside the grid rectangle.
double eval_u(const PdeSolution& sol, double t, double y);
double eval_u_y(const PdeSolution& sol, double t, double y);

// Sup-norm change on the inner half of the domain when the domain is doubled at equal spacing.
double boundary_influence(const ProblemFunctions& problem, const ModelSpec& spec, double theta,
                          VolatilityMode mode, const PdeGridConfig& grid, double riccati_dt = 1e-4);

// Solutions at θ nodes (shared domain) with u̇ by central differences in θ,
// one-sided at the end nodes.
struct PdeFamily {
  Eigen::VectorXd thetas;
  std::vector<PdeSolution> nodes;
  std::vector<Eigen::MatrixXd> u_dot;
};

PdeFamily theta_family(const ProblemFunctions& problem, const ModelSpec& spec, VolatilityMode mode,
                       const Eigen::VectorXd& thetas, const PdeGridConfig& grid, double riccati_dt = 1e-4);

// Uniform θ nodes over [α, β].
Eigen::VectorXd theta_nodes(const ModelSpec& spec, int n);

// Bilinear in (t, y), linear in θ; θ must lie within the family's nodes.
double eval_u(const PdeFamily& fam, double t, double y, double theta);
double eval_u_y(const PdeFamily& fam, double t, double y, double theta);
double eval_u_dot(const PdeFamily& fam, double t, double y, double theta);

}  // namespace hbsde
