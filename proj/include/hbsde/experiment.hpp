#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbsde/model.hpp"
#include "hbsde/sde_sim.hpp"

namespace hbsde {

// Hidden and observed paths of one replicate.
struct SimulatedData {
  SamplePath y, x;
};

// Noise from `seed`, Y at θ0 and X, on [0, T] with step dt.
SimulatedData simulate_data(const ModelSpec& spec, double theta0, double dt, std::uint64_t seed);

struct Statistic {
  std::string name;
  double epsilon = 0.0;
  double t = 0.0;  // 0 when not time-indexed
  double mean = 0.0, std_error = 0.0, variance = 0.0;
  int n = 0;
};

// A tolerance comparison lo <= value <= hi. Gate checks decide the suite outcome;
// the others are diagnostics.
struct Check {
  std::string name;
  double value = 0.0, lo = 0.0, hi = 0.0;
  bool gate = true;
  bool pass = false;
};

struct McReport {
  std::string suite;
  std::uint64_t seed = 0;
  int replicates = 0;
  std::vector<double> epsilons;
  std::vector<int> failed_replicates;
  double failure_budget = 0.01;
  std::vector<Statistic> statistics;
  std::vector<Check> checks;

  bool pass() const;
  const Check* find_check(const std::string& name) const;
  std::string to_json() const;
  std::string to_csv() const;
};

const std::vector<std::string>& suite_names();

// Runs a Monte Carlo suite (lemma1, lemma2, filter_oracle, prop1, prop2, prop3,
// pde, theorem1, corollary1). Replicate i uses noise seed split_seed(seed, i),
// shared across the ε ladder.
McReport run_experiment(const ExperimentConfig& config, const std::string& suite);

// Sup distance between the empirical law of x and N(0, 1).
double ks_distance_normal(std::vector<double> x);

}  // namespace hbsde
