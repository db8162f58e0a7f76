#include "hbsde/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "json.hpp"

#include "hbsde/bsde_approx.hpp"
#include "hbsde/estimators.hpp"
#include "hbsde/kalman.hpp"
#include "hbsde/onestep.hpp"
#include "hbsde/parallel.hpp"
#include "hbsde/pde.hpp"
#include "hbsde/random.hpp"

namespace hbsde {

namespace {

// Tolerances of the suites.
constexpr double kFailureBudget = 0.01;
const std::vector<double> kLemma1Ladder = {0.1, 0.05, 0.02, 0.01};
const std::vector<double> kRateLadder = {0.1, 0.05, 0.02};
constexpr double kLemma1SlopeLo = 0.6, kLemma1SlopeHi = 1.4;
constexpr double kFilterRatioLo = 0.35, kFilterRatioHi = 0.65;
constexpr double kOracleGap = 1e-2;
constexpr double kMleMean = 0.15, kMleVarLo = 0.7, kMleVarHi = 1.3, kKsMax = 0.08;
constexpr double kSubstRatioLo = 0.3, kSubstRatioHi = 0.8, kPsiInverseTol = 1e-6;
constexpr double kOnestepVarTol = 0.3, kUniformRadius = 0.1, kUniformProb = 0.05, kMomentSpread = 3.0;
constexpr double kPdeClosedForm = 1e-3, kTimeOrder = 1.0, kSpaceOrder = 2.0, kFkSigmas = 3.0;
constexpr double kTheoremTol = 0.35, kCorollaryVarTol = 0.4, kCorollaryMeanSigmas = 3.0;
constexpr int kCorollaryLimitPaths = 4000;
constexpr int kFeynmanKacPaths = 100000;

double sq(double x) { return x * x; }

struct Builder {
  McReport report;
  int attempts = 0;

  void stat(const std::string& name, double eps, double t, const Eigen::VectorXd& samples) {
    const MeanEstimate m = mean_estimate(samples);
    report.statistics.push_back({name, eps, t, m.mean, m.std_error, m.variance, m.n});
  }
  void value(const std::string& name, double eps, double t, double v, int n = 1, double se = 0.0) {
    report.statistics.push_back({name, eps, t, v, se, 0.0, n});
  }
  void check(const std::string& name, double v, double lo, double hi, bool gate = true) {
    report.checks.push_back({name, v, lo, hi, gate, std::isfinite(v) && v >= lo && v <= hi});
  }

  // Runs fn(i) for every replicate; failures are logged and recorded.
  template <class T, class Fn>
  std::vector<T> replicates(int n, Fn&& fn) {
    std::vector<std::optional<T>> out(static_cast<std::size_t>(n));
    std::vector<std::string> errors(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      try {
        out[i] = fn(static_cast<int>(i));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    attempts += n;
    std::vector<T> ok;
    ok.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (out[static_cast<std::size_t>(i)]) {
        ok.push_back(std::move(*out[static_cast<std::size_t>(i)]));
      } else {
        report.failed_replicates.push_back(i);
        std::cerr << report.suite << ": replicate " << i << " failed: " << errors[static_cast<std::size_t>(i)]
                  << "\n";
      }
    }
    return ok;
  }

  McReport finish() {
    const double frac = attempts > 0 ? static_cast<double>(report.failed_replicates.size()) / attempts : 0.0;
    check("failure_fraction", frac, 0.0, report.failure_budget);
    return report;
  }
};

Eigen::VectorXd column(const std::vector<Eigen::VectorXd>& rows, Index j) {
  Eigen::VectorXd c(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) c[static_cast<Index>(r)] = rows[r][j];
  return c;
}

Eigen::VectorXd times_from(double t0, double t1, double step) {
  const Index n = static_cast<Index>(std::llround((t1 - t0) / step)) + 1;
  Eigen::VectorXd t(n);
  for (Index i = 0; i < n; ++i) t[i] = t0 + step * static_cast<double>(i);
  t[n - 1] = t1;
  return t;
}

// Grid time nearest to s.
Index grid_index(double s, double dt) { return static_cast<Index>(std::llround(s / dt)); }

std::string eps_tag(double e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

// ---------------------------------------------------------------------------

void suite_lemma1(const ExperimentConfig& cfg, Builder& B) {
  std::vector<double> gaps;
  for (double eps : kLemma1Ladder) {
    const ModelSpec spec = cfg.model.with_epsilon(eps);
    const RiccatiTrajectory r = solve_riccati(spec, cfg.theta0, cfg.grid_dt);
    gaps.push_back(lemma1_gap(spec, r, cfg.t0));
    B.value("riccati_sup_gap", eps, cfg.t0, gaps.back());
    B.value("riccati_sup_gap_over_eps", eps, cfg.t0, gaps.back() / eps);
  }
  int violations = 0;
  for (std::size_t i = 1; i < gaps.size(); ++i) violations += gaps[i] < gaps[i - 1] ? 0 : 1;
  B.check("gap_strictly_decreasing_violations", violations, 0, 0);
  // least-squares slope of log gap against log ε
  const std::size_t n = gaps.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += std::log(kLemma1Ladder[i]) / n, my += std::log(gaps[i]) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(kLemma1Ladder[i]) - mx;
    sxy += dx * (std::log(gaps[i]) - my);
    sxx += dx * dx;
  }
  B.check("gap_loglog_slope", sxy / sxx, kLemma1SlopeLo, kLemma1SlopeHi);
}

void suite_lemma2(const ExperimentConfig& cfg, Builder& B) {
  const double dt = cfg.grid_dt;
  const Eigen::VectorXd times = times_from(cfg.t0, cfg.model.T, 0.01);
  const std::vector<double> sens_times = {0.3 * cfg.model.T, 0.6 * cfg.model.T, 0.9 * cfg.model.T};
  std::vector<double> sups;
  for (double eps : kRateLadder) {
    const ModelSpec spec = cfg.model.with_epsilon(eps);
    const RiccatiTrajectory ric = solve_riccati(spec, cfg.theta0, dt);
    struct Row {
      Eigen::VectorXd err, sens;
    };
    auto rows = B.replicates<Row>(cfg.mc_replicates, [&](int i) {
      const SimulatedData d = simulate_data(spec, cfg.theta0, dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
      const FilterTrajectory F = run_filter(spec, ric, d.x);
      Row r;
      r.err.resize(times.size());
      for (Index j = 0; j < times.size(); ++j) {
        const Index k = grid_index(times[j], dt);
        r.err[j] = sq(F.m[k] - d.y.v[k]);
      }
      r.sens.resize(static_cast<Index>(sens_times.size()));
      for (std::size_t j = 0; j < sens_times.size(); ++j)
        r.sens[static_cast<Index>(j)] = sq(F.m_dtheta[grid_index(sens_times[j], dt)]);
      return r;
    });
    std::vector<Eigen::VectorXd> err, sens;
    for (auto& r : rows) err.push_back(r.err), sens.push_back(r.sens);
    double best = -1.0, best_se = 0.0, best_t = 0.0;
    for (Index j = 0; j < times.size(); ++j) {
      const MeanEstimate m = mean_estimate(column(err, j));
      if (m.mean > best) best = m.mean, best_se = m.std_error, best_t = times[j];
    }
    sups.push_back(best);
    B.value("filter_mse_sup", eps, best_t, best, static_cast<int>(rows.size()), best_se);
    B.value("filter_mse_sup_over_eps", eps, best_t, best / eps, static_cast<int>(rows.size()), best_se / eps);
    for (std::size_t j = 0; j < sens_times.size(); ++j)
      B.stat("sensitivity_sq_over_eps", eps, sens_times[j], column(sens, static_cast<Index>(j)) / eps);
  }
  for (std::size_t i = 1; i < sups.size(); ++i)
    B.check("filter_mse_ratio_" + eps_tag(kRateLadder[i - 1]) + "_" + eps_tag(kRateLadder[i]),
            sups[i] / sups[i - 1], kFilterRatioLo, kFilterRatioHi);
}

void suite_filter_oracle(const ExperimentConfig& cfg, Builder& B) {
  const ModelSpec& spec = cfg.model;
  const RiccatiTrajectory ric = solve_riccati(spec, cfg.theta0, cfg.grid_dt);
  struct Row {
    double m_gap, gamma_gap;
  };
  auto rows = B.replicates<Row>(cfg.mc_replicates, [&](int i) {
    const SimulatedData d = simulate_data(spec, cfg.theta0, cfg.grid_dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const FilterTrajectory F = run_filter(spec, ric, d.x);
    const FilterTrajectory D = discrete_kalman_oracle(spec, cfg.theta0, d.x);
    return Row{(F.m - D.m).cwiseAbs().maxCoeff(), (F.gamma - D.gamma).cwiseAbs().maxCoeff()};
  });
  Eigen::VectorXd mg(static_cast<Index>(rows.size())), gg(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) mg[static_cast<Index>(i)] = rows[i].m_gap, gg[static_cast<Index>(i)] = rows[i].gamma_gap;
  B.stat("oracle_max_m_gap", spec.epsilon, 0.0, mg);
  B.stat("oracle_max_gamma_gap", spec.epsilon, 0.0, gg);
  B.check("oracle_worst_m_gap", rows.empty() ? NAN : mg.maxCoeff(), 0.0, kOracleGap);
  B.check("oracle_worst_gamma_gap", rows.empty() ? NAN : gg.maxCoeff(), 0.0, kOracleGap, false);
}

void suite_prop1(const ExperimentConfig& cfg, Builder& B) {
  const ModelSpec& spec = cfg.model;
  const double dt = cfg.grid_dt;
  const Index kt = steps_for(spec.tau, dt);
  const RiccatiTable table(spec, cfg.theta_grid_n, dt, kt);
  const double info = fisher_information(spec, cfg.theta0, 0.0, spec.tau);
  struct Row {
    double xi, identified;
  };
  const double lo_probe = spec.theta_lo + 0.2 * (cfg.theta0 - spec.theta_lo);
  const double hi_probe = cfg.theta0 + 0.6 * (spec.theta_hi - cfg.theta0);
  auto rows = B.replicates<Row>(cfg.mc_replicates, [&](int i) {
    SimulatedData d = simulate_data(spec, cfg.theta0, dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const LikelihoodCurve c = mle_preliminary(spec, d.x, cfg.theta_grid_n, &table);
    const double l0 = log_likelihood(spec, d.x, cfg.theta0);
    const bool ident = l0 > log_likelihood(spec, d.x, lo_probe) && l0 > log_likelihood(spec, d.x, hi_probe);
    return Row{std::sqrt(info / spec.epsilon) * (c.theta_hat - cfg.theta0), ident ? 1.0 : 0.0};
  });
  Eigen::VectorXd xi(static_cast<Index>(rows.size())), id(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) xi[static_cast<Index>(i)] = rows[i].xi, id[static_cast<Index>(i)] = rows[i].identified;
  const MeanEstimate m = mean_estimate(xi);
  B.stat("mle_normalized_error", spec.epsilon, spec.tau, xi);
  B.stat("likelihood_identification", spec.epsilon, spec.tau, id);
  B.check("mle_normalized_mean", m.mean, -kMleMean, kMleMean);
  B.check("mle_normalized_variance", m.variance, kMleVarLo, kMleVarHi);
  B.check("mle_ks_distance", ks_distance_normal({xi.data(), xi.data() + xi.size()}), 0.0, kKsMax);
}

void suite_prop2(const ExperimentConfig& cfg, Builder& B) {
  const ModelSpec canonical = canonical_model(0.1);
  const PsiInverse inv = invert_psi(canonical, 0.25);
  B.check("psi_inverse_closed_form_error", std::abs(inv.theta - 1.0), 0.0, kPsiInverseTol);

  std::vector<double> mses;
  for (double eps : kRateLadder) {
    const ModelSpec spec = cfg.model.with_epsilon(eps);
    struct Row {
      double err2, psi_hat, psi_trap;
      int event;
    };
    auto rows = B.replicates<Row>(cfg.mc_replicates, [&](int i) {
      const SimulatedData d = simulate_data(spec, cfg.theta0, cfg.grid_dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
      const SubstitutionPieces p = substitution_estimator(spec, d.x, cfg.bandwidth_scale, cfg.bandwidth_exponent);
      return Row{sq(p.theta_check - cfg.theta0), p.psi_hat, p.psi_hat_trapezoid, static_cast<int>(p.event)};
    });
    const Index n = static_cast<Index>(rows.size());
    Eigen::VectorXd e2(n), ph(n), pt(n), below(n), above(n);
    for (Index i = 0; i < n; ++i) {
      const Row& r = rows[static_cast<std::size_t>(i)];
      e2[i] = r.err2, ph[i] = r.psi_hat, pt[i] = r.psi_trap;
      below[i] = r.event == static_cast<int>(SubstitutionEvent::Below);
      above[i] = r.event == static_cast<int>(SubstitutionEvent::Above);
    }
    mses.push_back(e2.mean());
    B.stat("substitution_mse", eps, spec.tau, e2);
    B.stat("substitution_mse_over_eps", eps, spec.tau, e2 / eps);
    B.stat("psi_hat", eps, spec.tau, ph);
    B.stat("psi_hat_trapezoid", eps, spec.tau, pt);
    B.stat("event_below", eps, spec.tau, below);
    B.stat("event_above", eps, spec.tau, above);
    B.value("bandwidth", eps, spec.tau, substitution_bandwidth(spec, cfg.bandwidth_scale, cfg.bandwidth_exponent));
  }
  for (std::size_t i = 1; i < mses.size(); ++i)
    B.check("substitution_mse_ratio_" + eps_tag(kRateLadder[i - 1]) + "_" + eps_tag(kRateLadder[i]),
            mses[i] / mses[i - 1], kSubstRatioLo, kSubstRatioHi);
}

void suite_prop3(const ExperimentConfig& cfg, Builder& B) {
  const ModelSpec& spec = cfg.model;
  const double dt = cfg.grid_dt, T = spec.T, tau = spec.tau;
  const RiccatiTable table(spec, cfg.theta_grid_n, dt, steps_for(tau, dt));
  const std::vector<double> profile = {tau + (T - tau) / 3.0, tau + 2.0 * (T - tau) / 3.0, T};
  const std::vector<std::pair<double, double>> pairs = {{0.75 * T, 0.95 * T}, {0.75 * T, 0.85 * T}, {0.75 * T, 0.80 * T}};
  const double sup_from = 0.5 * T;
  struct Row {
    Eigen::VectorXd eta, incr4;
    double sup_dev;
    double eta_T_oracle;  // same path, preliminary replaced by θ0
  };
  auto rows = B.replicates<Row>(cfg.mc_replicates, [&](int i) {
    const SimulatedData d = simulate_data(spec, cfg.theta0, dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const LikelihoodCurve c = mle_preliminary(spec, d.x, cfg.theta_grid_n, &table);
    const EstimatorTrajectory E = onestep_process(spec, d.x, c.theta_hat);
    const SamplePath eta = normalized_error(E, cfg.theta0, spec.epsilon);
    Row r;
    r.eta.resize(static_cast<Index>(profile.size()));
    for (std::size_t j = 0; j < profile.size(); ++j) r.eta[static_cast<Index>(j)] = eta.v[grid_index(profile[j], dt)];
    r.incr4.resize(static_cast<Index>(pairs.size()));
    for (std::size_t j = 0; j < pairs.size(); ++j)
      r.incr4[static_cast<Index>(j)] =
          std::pow(eta.v[grid_index(pairs[j].first, dt)] - eta.v[grid_index(pairs[j].second, dt)], 4);
    r.sup_dev = 0.0;
    for (Index k = grid_index(sup_from, dt); k < E.t.size(); ++k)
      if (E.valid[k]) r.sup_dev = std::max(r.sup_dev, std::abs(E.theta_star[k] - cfg.theta0));
    const EstimatorTrajectory E0 = onestep_process(spec, d.x, cfg.theta0);
    r.eta_T_oracle = normalized_error(E0, cfg.theta0, spec.epsilon).v[E0.t.size() - 1];
    return r;
  });
  std::vector<Eigen::VectorXd> eta, incr;
  Eigen::VectorXd exceed(static_cast<Index>(rows.size())), eta_oracle(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    eta.push_back(rows[i].eta);
    incr.push_back(rows[i].incr4);
    exceed[static_cast<Index>(i)] = rows[i].sup_dev > kUniformRadius ? 1.0 : 0.0;
    eta_oracle[static_cast<Index>(i)] = rows[i].eta_T_oracle;
  }
  // Separates the finite-ε error of the preliminary estimate from the correction step.
  const double inv_info_T = 1.0 / fisher_information(spec, cfg.theta0, tau, T);
  B.stat("eta_oracle_preliminary", spec.epsilon, T, eta_oracle);
  B.check("eta_T_variance_ratio_oracle_preliminary", mean_estimate(eta_oracle).variance / inv_info_T,
          1.0 - kOnestepVarTol, 1.0 + kOnestepVarTol, false);
  for (std::size_t j = 0; j < profile.size(); ++j) {
    const Eigen::VectorXd col = column(eta, static_cast<Index>(j));
    const double inv_info = 1.0 / fisher_information(spec, cfg.theta0, tau, profile[j]);
    B.stat("eta", spec.epsilon, profile[j], col);
    B.value("eta_limit_variance", spec.epsilon, profile[j], inv_info);
    const double ratio = mean_estimate(col).variance / inv_info;
    if (j + 1 == profile.size()) {
      B.check("eta_T_variance_ratio", ratio, 1.0 - kOnestepVarTol, 1.0 + kOnestepVarTol);
      std::vector<double> z;
      for (Index r = 0; r < col.size(); ++r) z.push_back(col[r] / std::sqrt(inv_info));
      B.check("eta_T_ks_distance", ks_distance_normal(z), 0.0, kKsMax, false);
    } else {
      B.check("eta_variance_ratio_t" + eps_tag(profile[j]), ratio, 1.0 - kOnestepVarTol, 1.0 + kOnestepVarTol, false);
    }
  }
  B.stat("uniform_exceedance", spec.epsilon, sup_from, exceed);
  B.check("uniform_exceedance_probability", exceed.size() ? exceed.mean() : NAN, 0.0, kUniformProb);
  double cmin = INFINITY, cmax = 0.0;
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const Eigen::VectorXd col = column(incr, static_cast<Index>(j));
    const double gap = pairs[j].second - pairs[j].first;
    B.stat("eta_increment_fourth_moment_over_gap_sq", spec.epsilon, gap, col / (gap * gap));
    const double C = col.mean() / (gap * gap);
    cmin = std::min(cmin, C), cmax = std::max(cmax, C);
  }
  B.check("increment_moment_constant_spread", cmax / cmin, 1.0, kMomentSpread);
}

// --- PDE -------------------------------------------------------------------

double inner_half_error(const PdeSolution& sol, const std::function<double(double, double)>& exact, bool t0_only) {
  const double lo = sol.y[0], hi = sol.y[sol.y.size() - 1];
  const double c = 0.5 * (lo + hi), q = 0.25 * (hi - lo);
  double worst = 0.0;
  for (Index n = 0; n < sol.t.size(); ++n) {
    if (t0_only && n > 0) break;
    for (Index j = 0; j < sol.y.size(); ++j)
      if (std::abs(sol.y[j] - c) <= q) worst = std::max(worst, std::abs(sol.u(n, j) - exact(sol.t[n], sol.y[j])));
  }
  return worst;
}

void suite_pde(const ExperimentConfig& cfg, Builder& B) {
  const ModelSpec spec = canonical_model(cfg.model.epsilon);
  const double theta = 1.0, T = spec.T;
  PdeGridConfig grid = cfg.pde_grid;
  grid.y_min = grid.y_max = NAN;
  ProblemFunctions lin, quad, cosine;
  lin.Phi = Terminal::polynomial({0.0, 1.0});
  quad.Phi = Terminal::polynomial({0.0, 0.0, 1.0});
  cosine.Phi = Terminal::cosine(1.0, 1.0);

  const PdeSolution s_lin = solve_pde(lin, spec, theta, VolatilityMode::Limit, grid, cfg.grid_dt);
  const PdeSolution s_quad = solve_pde(quad, spec, theta, VolatilityMode::Limit, grid, cfg.grid_dt);
  const double e_lin = inner_half_error(s_lin, [&](double t, double y) { return y * std::exp(-(T - t)); }, false);
  const double e_quad = inner_half_error(s_quad, [&](double t, double y) {
    const double e = std::exp(-2.0 * (T - t));
    return y * y * e + theta * theta * (1.0 - e) / 2.0;
  }, false);
  B.check("closed_form_linear_error", e_lin, 0.0, kPdeClosedForm);
  B.check("closed_form_quadratic_error", e_quad, 0.0, kPdeClosedForm);
  B.value("u_linear_at_0_2", 0.0, 0.0, eval_u(s_lin, 0.0, 2.0));

  auto cos_exact = [&](double t, double y) {
    const double e = std::exp(-(T - t));
    const double var = theta * theta * (1.0 - e * e) / 2.0;
    return std::cos(y * e) * std::exp(-var / 2.0);
  };
  // time refinement on a fine y grid, then space refinement with many time steps
  std::vector<double> et, ey;
  for (int nt : {20, 40, 80}) {
    PdeGridConfig g = grid;
    g.n_y = 1601, g.n_t = nt;
    et.push_back(inner_half_error(solve_pde(cosine, spec, theta, VolatilityMode::Limit, g, cfg.grid_dt), cos_exact, true));
  }
  for (int ny : {101, 201, 401}) {
    PdeGridConfig g = grid;
    g.n_y = ny, g.n_t = 4000;
    ey.push_back(inner_half_error(solve_pde(cosine, spec, theta, VolatilityMode::Limit, g, cfg.grid_dt), cos_exact, true));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    B.value("time_refinement_error", 0.0, 0.0, et[i]);
    B.value("space_refinement_error", 0.0, 0.0, ey[i]);
  }
  B.check("time_order", std::log2(et[1] / et[2]), kTimeOrder, INFINITY);
  B.check("space_order", std::log2(ey[1] / ey[2]), kSpaceOrder, INFINITY);

  // Feynman–Kac: u(0, y0) against the mean of Φ(Y_T) with the same volatility
  const double fk_dt = 1e-3;
  const Index fk_steps = steps_for(T, fk_dt);
  const int paths = kFeynmanKacPaths;
  Eigen::VectorXd phi(paths);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t p) {
    CounterRng rng(split_seed(cfg.seed ^ 0xF00DULL, p));
    std::normal_distribution<double> g;
    double y = spec.y0;
    const double sd = std::sqrt(fk_dt);
    for (Index k = 0; k < fk_steps; ++k) {
      const double t = fk_dt * static_cast<double>(k);
      y += -spec.a(t) * y * fk_dt + spec.b(theta, t) * sd * g(rng);
    }
    phi[static_cast<Index>(p)] = quad.Phi(y);
  });
  const MeanEstimate fk = mean_estimate(phi);
  const double u0 = eval_u(s_quad, 0.0, spec.y0);
  B.value("feynman_kac_pde", 0.0, 0.0, u0);
  B.stat("feynman_kac_mc", 0.0, 0.0, phi);
  B.check("feynman_kac_gap_in_std_errors", std::abs(u0 - fk.mean) / fk.std_error, 0.0, kFkSigmas);

  // diagnostics
  double terminal = 0.0;
  for (Index j = 0; j < s_quad.y.size(); ++j)
    terminal = std::max(terminal, std::abs(s_quad.u(s_quad.t.size() - 1, j) - quad.Phi(s_quad.y[j])));
  B.check("terminal_condition_error", terminal, 0.0, 0.0, false);
  B.check("maximum_principle_min_u", s_quad.u.minCoeff(), -1e-8, INFINITY, false);
  B.check("boundary_influence", boundary_influence(quad, spec, spec.theta_hi, VolatilityMode::Limit, grid, cfg.grid_dt),
          0.0, 1e-4, false);
  std::vector<double> dist;
  for (double eps : kRateLadder) {
    const ModelSpec se = spec.with_epsilon(eps);
    const PdeSolution ue = solve_pde(quad, se, theta, VolatilityMode::Epsilon, grid, cfg.grid_dt);
    double d = 0.0;
    for (Index n = 0; n < ue.t.size(); ++n)
      if (ue.t[n] >= cfg.t0) d = std::max(d, (ue.u.row(n) - s_quad.u.row(n)).cwiseAbs().maxCoeff());
    dist.push_back(d);
    B.value("epsilon_mode_distance", eps, cfg.t0, d);
  }
  B.check("epsilon_continuity_monotone", (dist[1] < dist[0] && dist[2] < dist[1]) ? 1.0 : 0.0, 1.0, 1.0, false);
}

// --- approximation studies ---------------------------------------------------

struct ApproxStudy {
  ErrorDiagnostics diag;
  std::vector<ReplicateErrors> reps;
  double terminal_gap = 0.0;
  PdeFamily limit_family;
};

// With oracle_preliminary the one-step process starts from θ0 instead of the MLE.
ApproxStudy approximation_study(const ExperimentConfig& cfg, Builder& B, bool oracle_preliminary = false) {
  const ModelSpec& spec = cfg.model;
  const double dt = cfg.grid_dt;
  const Index steps = steps_for(spec.T, dt);
  const RiccatiTable table(spec, cfg.theta_grid_n, dt, steps);
  const Eigen::VectorXd nodes = theta_nodes(spec, cfg.theta_grid_n);
  const PdeFamily eps_family = theta_family(cfg.problem, spec, VolatilityMode::Epsilon, nodes, cfg.pde_grid, dt);
  ApproxStudy S;
  S.limit_family = theta_family(cfg.problem, spec, VolatilityMode::Limit, nodes, cfg.pde_grid, dt);
  const Eigen::VectorXd eval_times = (Eigen::VectorXd(2) << 0.5 * spec.T, 0.75 * spec.T).finished();
  const Eigen::VectorXd gap_times = times_from(0.5 * spec.T, spec.T, 0.01);
  const Weight one = [](double) { return 1.0; };

  struct Row {
    ReplicateErrors e;
    double terminal;
  };
  auto rows = B.replicates<Row>(cfg.mc_replicates, [&](int i) {
    const SimulatedData d = simulate_data(spec, cfg.theta0, dt, split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const double prelim =
        oracle_preliminary ? cfg.theta0 : mle_preliminary(spec, d.x, cfg.theta_grid_n, &table).theta_hat;
    const EstimatorTrajectory E = onestep_process(spec, d.x, prelim);
    ReferenceInputs ref;
    ref.theta0 = cfg.theta0;
    ref.y_path = &d.y;
    ref.limit_family = &S.limit_family;
    const ApproximationResult R = approximate(spec, d.x, eps_family, E, table, &ref);
    const Index last = R.t.size() - 1;
    return Row{summarize(R, eval_times, gap_times, one), std::abs(R.Z_hat[last] - cfg.problem.Phi(R.m_hat[last]))};
  });
  for (auto& r : rows) {
    S.terminal_gap = std::max(S.terminal_gap, r.terminal);
    S.reps.push_back(std::move(r.e));
  }
  if (S.reps.size() < 2) throw SimulationError("too few successful replicates");
  S.diag = error_report(S.reps, S.limit_family, spec, cfg.theta0, eval_times);
  return S;
}

void suite_theorem1(const ExperimentConfig& cfg, Builder& B) {
  const ApproxStudy S = approximation_study(cfg, B);
  const double eps = cfg.model.epsilon;
  const auto& d = S.diag;
  for (Index j = 0; j < d.eval_times.size(); ++j) {
    const double t = d.eval_times[j];
    const auto& m = d.mse[static_cast<std::size_t>(j)];
    const auto& L = d.limits[static_cast<std::size_t>(j)];
    B.value("scaled_mse", eps, t, m.mean, m.n, m.std_error);
    B.value("scaled_mse_vs_ref", eps, t, d.mse_ref[static_cast<std::size_t>(j)].mean, m.n,
            d.mse_ref[static_cast<std::size_t>(j)].std_error);
    B.value("scaled_mse_swap", eps, t, d.mse_swap[static_cast<std::size_t>(j)].mean, m.n,
            d.mse_swap[static_cast<std::size_t>(j)].std_error);
    B.value("limit_filter_term", eps, t, L.filter_term);
    B.value("limit_estimator_term", eps, t, L.estimator_term);
    B.value("limit_total", eps, t, L.total());
    B.check("scaled_mse_over_limit_t" + eps_tag(t), m.mean / L.total(), 1.0 - kTheoremTol, 1.0 + kTheoremTol);
    B.check("ref_mse_over_estimator_term_t" + eps_tag(t), d.mse_ref[static_cast<std::size_t>(j)].mean / L.estimator_term,
            1.0 - kTheoremTol, 1.0 + kTheoremTol, false);
    B.check("adaptive_filter_swap_change_t" + eps_tag(t),
            std::abs(d.mse_swap[static_cast<std::size_t>(j)].mean / m.mean - 1.0), 0.0, 0.1, false);
  }
  B.value("filter_gap_sup_over_eps_sq", eps, 0.5 * cfg.model.T, d.filter_gap_sup);
  B.check("terminal_consistency", S.terminal_gap, 0.0, 1e-3, false);

  const ApproxStudy O = approximation_study(cfg, B, true);
  for (Index j = 0; j < O.diag.eval_times.size(); ++j) {
    const double t = O.diag.eval_times[j];
    const auto& m = O.diag.mse[static_cast<std::size_t>(j)];
    B.value("scaled_mse_oracle_preliminary", eps, t, m.mean, m.n, m.std_error);
    B.check("oracle_preliminary_mse_over_limit_t" + eps_tag(t),
            m.mean / O.diag.limits[static_cast<std::size_t>(j)].total(), 1.0 - kTheoremTol, 1.0 + kTheoremTol,
            false);
  }
}

void suite_corollary1(const ExperimentConfig& cfg, Builder& B) {
  const ApproxStudy S = approximation_study(cfg, B);
  const double eps = cfg.model.epsilon;
  const auto& I = S.diag.integrated;
  const MeanEstimate lim = corollary1_limit(cfg.model, S.limit_family, cfg.theta0, [](double) { return 1.0; },
                                            kCorollaryLimitPaths, split_seed(cfg.seed, 0xC0FFEEULL), cfg.grid_dt);
  B.value("integrated_statistic", eps, cfg.model.T, I.mean, I.n, I.std_error);
  B.value("integrated_statistic_variance", eps, cfg.model.T, I.variance, I.n);
  B.value("integrated_statistic_vs_ref_variance", eps, cfg.model.T, S.diag.integrated_ref.variance, I.n);
  B.value("limit_law_mean", 0.0, cfg.model.T, lim.mean, lim.n, lim.std_error);
  B.value("limit_law_variance", 0.0, cfg.model.T, lim.variance, lim.n);
  B.check("integrated_mean_in_std_errors", I.mean / I.std_error, -kCorollaryMeanSigmas, kCorollaryMeanSigmas);
  B.check("integrated_variance_over_limit", I.variance / lim.variance, 1.0 - kCorollaryVarTol, 1.0 + kCorollaryVarTol);
}

}  // namespace

// ---------------------------------------------------------------------------

SimulatedData simulate_data(const ModelSpec& spec, double theta0, double dt, std::uint64_t seed) {
  const NoiseBundle noise = NoiseBundle::generate(seed, dt, steps_for(spec.T, dt));
  SimulatedData d;
  d.y = simulate_forward(spec, theta0, noise);
  d.x = simulate_observation(spec, d.y, noise);
  return d;
}

double ks_distance_normal(std::vector<double> x) {
  if (x.empty()) return NAN;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    D = std::max({D, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return D;
}

bool McReport::pass() const {
  for (const auto& c : checks)
    if (c.gate && !c.pass) return false;
  return true;
}

const Check* McReport::find_check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string McReport::to_json() const {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  ordered_json j;
  j["schema"] = "hbsde.mc_report";
  j["schema_version"] = 1;
  j["suite"] = suite;
  j["seed"] = seed;
  j["replicates"] = replicates;
  j["epsilons"] = epsilons;
  j["seed_ledger"] = {{"rule", "replicate i uses noise seed mix64(seed ^ mix64(i + 0x9E3779B97F4A7C15))"},
                      {"base_seed", seed}};
  j["failures"] = {{"count", failed_replicates.size()}, {"budget", failure_budget}, {"replicates", failed_replicates}};
  ordered_json stats = ordered_json::array();
  for (const auto& s : statistics)
    stats.push_back({{"name", s.name},
                     {"epsilon", num(s.epsilon)},
                     {"t", num(s.t)},
                     {"mean", num(s.mean)},
                     {"std_error", num(s.std_error)},
                     {"variance", num(s.variance)},
                     {"n", s.n}});
  j["statistics"] = stats;
  ordered_json cks = ordered_json::array();
  for (const auto& c : checks)
    cks.push_back({{"name", c.name}, {"value", num(c.value)}, {"lo", num(c.lo)}, {"hi", num(c.hi)},
                   {"gate", c.gate}, {"pass", c.pass}});
  j["checks"] = cks;
  j["pass"] = pass();
  return j.dump(2) + "\n";
}

std::string McReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "name,epsilon,t,mean,std_error,variance,n\n";
  for (const auto& s : statistics)
    os << s.name << ',' << s.epsilon << ',' << s.t << ',' << s.mean << ',' << s.std_error << ',' << s.variance << ','
       << s.n << '\n';
  return os.str();
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"lemma1", "lemma2", "filter_oracle", "prop1", "prop2",
                                                 "prop3",  "pde",    "theorem1",      "corollary1"};
  return names;
}

McReport run_experiment(const ExperimentConfig& config, const std::string& suite) {
  config.validate();
  Builder B;
  B.report.suite = suite;
  B.report.seed = config.seed;
  B.report.replicates = config.mc_replicates;
  B.report.failure_budget = kFailureBudget;
  if (suite == "lemma1") {
    B.report.epsilons = kLemma1Ladder;
    B.report.replicates = 0;
    suite_lemma1(config, B);
  } else if (suite == "lemma2") {
    B.report.epsilons = kRateLadder;
    suite_lemma2(config, B);
  } else if (suite == "filter_oracle") {
    B.report.epsilons = {config.model.epsilon};
    suite_filter_oracle(config, B);
  } else if (suite == "prop1") {
    B.report.epsilons = {config.model.epsilon};
    suite_prop1(config, B);
  } else if (suite == "prop2") {
    B.report.epsilons = kRateLadder;
    suite_prop2(config, B);
  } else if (suite == "prop3") {
    B.report.epsilons = {config.model.epsilon};
    suite_prop3(config, B);
  } else if (suite == "pde") {
    B.report.epsilons = kRateLadder;
    B.report.replicates = kFeynmanKacPaths;
    suite_pde(config, B);
  } else if (suite == "theorem1") {
    B.report.epsilons = {config.model.epsilon};
    suite_theorem1(config, B);
  } else if (suite == "corollary1") {
    B.report.epsilons = {config.model.epsilon};
    suite_corollary1(config, B);
  } else {
    throw ConfigError("unknown suite '" + suite + "'");
  }
  return B.finish();
}

}  // namespace hbsde
