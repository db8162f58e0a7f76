#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hbsde/bsde_approx.hpp"
#include "hbsde/estimators.hpp"
#include "hbsde/experiment.hpp"
#include "hbsde/kalman.hpp"
#include "hbsde/model.hpp"
#include "hbsde/onestep.hpp"
#include "hbsde/pde.hpp"
#include "hbsde/random.hpp"

namespace fs = std::filesystem;
using namespace hbsde;

namespace {

constexpr int kExitPass = 0, kExitFail = 1, kExitUsage = 2, kExitRuntime = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string format = "csv";
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_table(const Common& c, const std::string& stem, const Table& t) {
  fs::create_directories(c.out_dir);
  const fs::path path = fs::path(c.out_dir) / (stem + "." + c.format);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (c.format == "json") {
    nlohmann::ordered_json j;
    j["columns"] = t.columns;
    j["rows"] = t.rows;
    out << j.dump() << "\n";
  } else {
    out.precision(17);
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << "\n";
    for (const auto& r : t.rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << "\n";
    }
  }
  std::cout << "wrote " << path.string() << "\n";
}

void write_text(const Common& c, const std::string& name, const std::string& text) {
  fs::create_directories(c.out_dir);
  const fs::path path = fs::path(c.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  std::cout << "wrote " << path.string() << "\n";
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  if (c.config_path.empty()) {
    cfg = canonical_config();
    apply_seed_environment(cfg);
  } else {
    cfg = load_config_file(c.config_path);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

SimulatedData data_for(const ExperimentConfig& cfg) {
  return simulate_data(cfg.model, cfg.theta0, cfg.grid_dt, cfg.seed);
}

double preliminary(const ExperimentConfig& cfg, const SamplePath& x, const std::string& method) {
  if (method == "substitution")
    return substitution_estimator(cfg.model, x, cfg.bandwidth_scale, cfg.bandwidth_exponent).theta_check;
  return mle_preliminary(cfg.model, x, cfg.theta_grid_n).theta_hat;
}

int cmd_simulate(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const SimulatedData d = data_for(cfg);
  Table t{{"t", "Y", "X"}, {}};
  for (Index k = 0; k < d.x.size(); ++k) t.rows.push_back({d.x.t[k], d.y.v[k], d.x.v[k]});
  write_table(c, "simulate", t);
  return kExitPass;
}

int cmd_filter(const Common& c, std::optional<double> theta_opt) {
  const ExperimentConfig cfg = load(c);
  const double theta = theta_opt.value_or(cfg.theta0);
  const SimulatedData d = data_for(cfg);
  const RiccatiTrajectory r = solve_riccati(cfg.model, theta, cfg.grid_dt);
  const FilterTrajectory F = run_filter(cfg.model, r, d.x);
  const SamplePath w = innovation(cfg.model, F, d.x);
  Table t{{"t", "m", "gamma", "gamma_star", "m_dtheta", "innovation"}, {}};
  for (Index k = 0; k < d.x.size(); ++k)
    t.rows.push_back({F.t[k], F.m[k], r.gamma[k], r.gamma_star[k], F.m_dtheta[k], w.v[k]});
  write_table(c, "filter", t);
  return kExitPass;
}

int cmd_estimate(const Common& c, const std::string& method) {
  const ExperimentConfig cfg = load(c);
  const SimulatedData d = data_for(cfg);
  Table t;
  double estimate = 0.0;
  if (method == "mle") {
    const LikelihoodCurve curve = mle_preliminary(cfg.model, d.x, cfg.theta_grid_n);
    estimate = curve.theta_hat;
    t.columns = {"theta", "log_likelihood"};
    for (Index i = 0; i < curve.thetas.size(); ++i) t.rows.push_back({curve.thetas[i], curve.values[i]});
    t.rows.push_back({curve.theta_hat, curve.ell_hat});
    if (curve.flat) std::cerr << "warning: flat likelihood; returning the grid argmax\n";
  } else {
    const SubstitutionPieces p = substitution_estimator(cfg.model, d.x, cfg.bandwidth_scale, cfg.bandwidth_exponent);
    estimate = p.theta_check;
    t.columns = {"bandwidth", "N_bar", "psi_hat", "psi_hat_trapezoid", "psi_lo", "psi_hi", "event", "theta_check"};
    t.rows.push_back({p.bandwidth, p.N_bar, p.psi_hat, p.psi_hat_trapezoid, p.psi_lo, p.psi_hi,
                      static_cast<double>(p.event), p.theta_check});
  }
  write_table(c, "estimate_" + method, t);
  std::cout << "theta_estimate " << std::setprecision(10) << estimate << "\n";
  return kExitPass;
}

int cmd_onestep(const Common& c, const std::string& method) {
  const ExperimentConfig cfg = load(c);
  const SimulatedData d = data_for(cfg);
  const double prelim = preliminary(cfg, d.x, method);
  const EstimatorTrajectory E = onestep_process(cfg.model, d.x, prelim);
  const SamplePath eta = normalized_error(E, cfg.theta0, cfg.model.epsilon);
  Table t{{"t", "theta_star", "info", "eta"}, {}};
  for (Index k = E.k_tau + 1; k < E.t.size(); ++k)
    if (E.valid[k]) t.rows.push_back({E.t[k], E.theta_star[k], E.info[k], eta.v[k]});
  write_table(c, "onestep", t);
  std::cout << "preliminary " << prelim << "\ntheta_star_T " << E.theta_star[E.t.size() - 1] << "\n";
  return kExitPass;
}

int cmd_pde(const Common& c, std::optional<double> theta_opt, const std::string& mode_name) {
  const ExperimentConfig cfg = load(c);
  const double theta = theta_opt.value_or(cfg.theta0);
  const VolatilityMode mode = mode_name == "limit" ? VolatilityMode::Limit : VolatilityMode::Epsilon;
  const PdeFamily fam = theta_family(cfg.problem, cfg.model, mode, theta_nodes(cfg.model, cfg.theta_grid_n),
                                     cfg.pde_grid, cfg.grid_dt);
  const PdeSolution& grid = fam.nodes.front();
  Table t{{"t", "y", "u", "u_y", "u_dot"}, {}};
  for (Index n = 0; n < grid.t.size(); ++n)
    for (Index j = 0; j < grid.y.size(); ++j) {
      const double tt = grid.t[n], y = grid.y[j];
      t.rows.push_back({tt, y, eval_u(fam, tt, y, theta), eval_u_y(fam, tt, y, theta), eval_u_dot(fam, tt, y, theta)});
    }
  write_table(c, "pde", t);
  return kExitPass;
}

int cmd_approx(const Common& c, int csv_replicates) {
  ExperimentConfig cfg = load(c);
  const ModelSpec& spec = cfg.model;
  const double dt = cfg.grid_dt;
  const RiccatiTable table(spec, cfg.theta_grid_n, dt, steps_for(spec.T, dt));
  const Eigen::VectorXd nodes = theta_nodes(spec, cfg.theta_grid_n);
  const PdeFamily eps_family = theta_family(cfg.problem, spec, VolatilityMode::Epsilon, nodes, cfg.pde_grid, dt);
  const PdeFamily limit_family = theta_family(cfg.problem, spec, VolatilityMode::Limit, nodes, cfg.pde_grid, dt);
  for (int i = 0; i < std::min(csv_replicates, cfg.mc_replicates); ++i) {
    const SimulatedData d = simulate_data(spec, cfg.theta0, dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const LikelihoodCurve curve = mle_preliminary(spec, d.x, cfg.theta_grid_n, &table);
    const EstimatorTrajectory E = onestep_process(spec, d.x, curve.theta_hat);
    ReferenceInputs ref{cfg.theta0, &d.y, &limit_family};
    const ApproximationResult R = approximate(spec, d.x, eps_family, E, table, &ref);
    Table t{{"t", "m_hat", "Z_hat", "s_hat", "Z_ref", "Z_limit"}, {}};
    for (Index k = 0; k < R.t.size(); ++k)
      t.rows.push_back({R.t[k], R.m_hat[k], R.Z_hat[k], R.s_hat[k], R.Z_ref[k], R.Z_limit[k]});
    write_table(c, "approx_replicate_" + std::to_string(i), t);
  }
  const McReport report = run_experiment(cfg, "theorem1");
  write_text(c, "approx_report.json", report.to_json());
  return report.pass() ? kExitPass : kExitFail;
}

int cmd_mc(const Common& c, const std::string& suite) {
  const ExperimentConfig cfg = load(c);
  const McReport report = run_experiment(cfg, suite);
  write_text(c, suite + "_report.json", report.to_json());
  write_text(c, suite + "_report.csv", report.to_csv());
  for (const auto& ck : report.checks)
    std::cout << (ck.pass ? "pass " : "FAIL ") << ck.name << " = " << ck.value << " in [" << ck.lo << ", " << ck.hi
              << "]" << (ck.gate ? "" : " (diagnostic)") << "\n";
  std::cout << "suite " << suite << ": " << (report.pass() ? "pass" : "fail") << "\n";
  return report.pass() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden-state BSDE approximation: simulation, filtering, estimation, PDE and Monte Carlo suites"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Configuration file (default: the canonical model)");
    sub->add_option("--seed", common.seed, "Override the configured seed");
    sub->add_option("--out-dir", common.out_dir, "Output directory");
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  };

  std::optional<double> theta;
  std::string method = "mle", mode = "epsilon", suite;
  int csv_replicates = 1;

  auto* sim = app.add_subcommand("simulate", "Simulate hidden and observed paths");
  add_common(sim);
  auto* filt = app.add_subcommand("filter", "Kalman–Bucy filter, sensitivity and innovation");
  add_common(filt);
  filt->add_option("--theta", theta, "Filter parameter (default: theta0)");
  auto* est = app.add_subcommand("estimate", "Preliminary estimate on the learning interval");
  add_common(est);
  est->add_option("--method", method, "Estimator")->check(CLI::IsMember({"mle", "substitution"}));
  auto* one = app.add_subcommand("onestep", "One-step MLE-process on (tau, T]");
  add_common(one);
  one->add_option("--method", method, "Preliminary estimator")->check(CLI::IsMember({"mle", "substitution"}));
  auto* pde = app.add_subcommand("pde", "Solve the backward PDE family");
  add_common(pde);
  pde->add_option("--theta", theta, "Parameter to report (default: theta0)");
  pde->add_option("--mode", mode, "Volatility")->check(CLI::IsMember({"epsilon", "limit"}));
  auto* apx = app.add_subcommand("approx", "BSDE approximation with error report");
  add_common(apx);
  apx->add_option("--csv-replicates", csv_replicates, "Replicates written as CSV");
  auto* mc = app.add_subcommand("mc", "Monte Carlo suite");
  add_common(mc);
  mc->add_option("--suite", suite, "Suite name")->required()->check(CLI::IsMember(suite_names()));

  if (argc <= 1) {
    std::cout << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*filt) return cmd_filter(common, theta);
    if (*est) return cmd_estimate(common, method);
    if (*one) return cmd_onestep(common, method);
    if (*pde) return cmd_pde(common, theta, mode);
    if (*apx) return cmd_approx(common, csv_replicates);
    if (*mc) return cmd_mc(common, suite);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
