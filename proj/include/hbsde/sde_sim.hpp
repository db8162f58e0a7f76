#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "hbsde/model.hpp"

namespace hbsde {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PathKind { Hidden, Observation, Innovation, Diagnostic };

// Values on a uniform time grid.
struct SamplePath {
  Eigen::VectorXd t;
  Eigen::VectorXd v;
  PathKind kind = PathKind::Diagnostic;

  Index size() const { return t.size(); }
  double dt() const { return t[1] - t[0]; }
  // Throws unless len(t) = len(v) >= 2 and the step is constant.
  void check() const;
};

Eigen::VectorXd uniform_grid(double dt, Index steps);

// Throws SimulationError unless both grids have equal length and nodes.
void require_same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what);

// Independent N(0, dt) increments for the state noise V and the observation noise W.
struct NoiseBundle {
  std::uint64_t seed = 0;
  double dt = 0.0;
  Eigen::VectorXd dV, dW;

  static NoiseBundle generate(std::uint64_t seed, double dt, Index steps);
  Index steps() const { return dV.size(); }
};

// Euler–Maruyama path of Y with Y_0 = y0.
SamplePath simulate_forward(const ModelSpec& spec, double theta, const NoiseBundle& noise);

// X_0 = 0, X_{k+1} = X_k + f Y_k dt + ε σ dW_k.
SamplePath simulate_observation(const ModelSpec& spec, const SamplePath& y_path,
                                const NoiseBundle& noise);

}  // namespace hbsde
