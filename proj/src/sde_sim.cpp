#include "hbsde/sde_sim.hpp"

#include <cmath>
#include <random>

#include "hbsde/random.hpp"

namespace hbsde {

void SamplePath::check() const {
  if (t.size() != v.size() || t.size() < 2)
    throw SimulationError("sample path needs matching t and v of length >= 2");
  const double h = t[1] - t[0];
  if (!(h > 0.0)) throw SimulationError("sample path times must increase");
  for (Index k = 1; k < t.size(); ++k)
    if (std::abs((t[k] - t[k - 1]) - h) > 1e-12 * std::max(1.0, std::abs(t[k])) + 1e-9 * h)
      throw SimulationError("sample path grid is not uniform");
}

Eigen::VectorXd uniform_grid(double dt, Index steps) {
  Eigen::VectorXd t(steps + 1);
  for (Index k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

void require_same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) throw SimulationError(std::string(what) + ": grid length mismatch");
  for (Index k = 0; k < a.size(); ++k)
    if (std::abs(a[k] - b[k]) > 1e-12 * std::max(1.0, std::abs(a[k])))
      throw SimulationError(std::string(what) + ": grid mismatch");
}

NoiseBundle NoiseBundle::generate(std::uint64_t seed, double dt, Index steps) {
  NoiseBundle n;
  n.seed = seed;
  n.dt = dt;
  n.dV.resize(steps);
  n.dW.resize(steps);
  const double sd = std::sqrt(dt);
  CounterRng rv(split_seed(seed, 0)), rw(split_seed(seed, 1));
  std::normal_distribution<double> gauss;
  for (Index k = 0; k < steps; ++k) n.dV[k] = sd * gauss(rv);
  gauss.reset();
  for (Index k = 0; k < steps; ++k) n.dW[k] = sd * gauss(rw);
  return n;
}

SamplePath simulate_forward(const ModelSpec& spec, double theta, const NoiseBundle& noise) {
  if (!spec.contains(theta)) throw SimulationError("θ outside the parameter interval");
  const Index steps = noise.steps();
  const double dt = noise.dt;
  SamplePath p;
  p.kind = PathKind::Hidden;
  p.t = uniform_grid(dt, steps);
  p.v.resize(steps + 1);
  p.v[0] = spec.y0;
  for (Index k = 0; k < steps; ++k) {
    const double t = p.t[k];
    p.v[k + 1] = p.v[k] - spec.a(t) * p.v[k] * dt + spec.b(theta, t) * noise.dV[k];
    if (!std::isfinite(p.v[k + 1])) throw SimulationError("non-finite state in forward path");
  }
  return p;
}

SamplePath simulate_observation(const ModelSpec& spec, const SamplePath& y_path,
                                const NoiseBundle& noise) {
  const Index steps = noise.steps();
  if (y_path.size() != steps + 1 || std::abs(y_path.dt() - noise.dt) > 1e-12 * noise.dt)
    throw SimulationError("observation grid does not match the hidden path");
  const double dt = noise.dt;
  SamplePath x;
  x.kind = PathKind::Observation;
  x.t = y_path.t;
  x.v.resize(steps + 1);
  x.v[0] = 0.0;
  for (Index k = 0; k < steps; ++k) {
    const double t = x.t[k];
    x.v[k + 1] = x.v[k] + spec.f(t) * y_path.v[k] * dt + spec.epsilon * spec.sigma(t) * noise.dW[k];
  }
  return x;
}

}  // namespace hbsde
