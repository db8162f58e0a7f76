#include "hbsde/estimators.hpp"

#include <cmath>

namespace hbsde {

namespace {

SamplePath head(const SamplePath& x, Index n) {
  SamplePath h;
  h.kind = x.kind;
  h.t = x.t.head(n);
  h.v = x.v.head(n);
  return h;
}

Index tau_steps(const ModelSpec& spec, const SamplePath& x_path) {
  const Index k = steps_for(spec.tau, x_path.dt());
  if (x_path.size() < k + 1) throw EstimationError("observation path does not cover [0, τ]");
  return k;
}

}  // namespace

double log_likelihood(const ModelSpec& spec, const SamplePath& x_path, const RiccatiTrajectory& riccati) {
  const Index kt = tau_steps(spec, x_path);
  const SamplePath x = head(x_path, kt + 1);
  const FilterTrajectory F = run_filter(spec, riccati, x);
  const double e2 = spec.epsilon * spec.epsilon;
  const double dt = x.dt();
  double ell = 0.0;
  for (Index k = 0; k < kt; ++k) {
    const double t = x.t[k];
    const double f = spec.f(t), s = spec.sigma(t);
    const double fm = f * F.m[k];
    ell += fm / (e2 * s * s) * (x.v[k + 1] - x.v[k]) - fm * fm / (2.0 * e2 * s * s) * dt;
  }
  return ell;
}

double log_likelihood(const ModelSpec& spec, const SamplePath& x_path, double theta) {
  const Index kt = tau_steps(spec, x_path);
  return log_likelihood(spec, x_path, solve_riccati(spec, theta, x_path.dt(), kt));
}

LikelihoodCurve mle_preliminary(const ModelSpec& spec, const SamplePath& x_path, int n_grid,
                                const RiccatiTable* table) {
  if (n_grid < 2) throw EstimationError("likelihood grid needs at least two nodes");
  const double lo = spec.theta_lo, hi = spec.theta_hi;
  LikelihoodCurve c;
  c.thetas.resize(n_grid);
  c.values.resize(n_grid);
  const bool use_table = table != nullptr && table->size() == n_grid;
  for (int i = 0; i < n_grid; ++i) {
    c.thetas[i] = i + 1 == n_grid ? hi : lo + (hi - lo) * i / (n_grid - 1);
    c.values[i] = use_table ? log_likelihood(spec, x_path, table->node(i))
                            : log_likelihood(spec, x_path, c.thetas[i]);
    if (!std::isfinite(c.values[i])) throw EstimationError("non-finite log-likelihood");
  }
  c.evaluations = n_grid;
  Index best = 0;
  c.values.maxCoeff(&best);
  c.theta_hat = c.thetas[best];
  c.ell_hat = c.values[best];
  if (c.values.maxCoeff() - c.values.minCoeff() <= 1e-12 * (1.0 + std::abs(c.ell_hat))) {
    c.flat = true;
    return c;
  }

  // Golden section on the bracket around the grid argmax.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double tol = 1e-4 * (hi - lo);
  double a = c.thetas[std::max<Index>(best - 1, 0)];
  double b = c.thetas[std::min<Index>(best + 1, n_grid - 1)];
  auto ell = [&](double th) {
    ++c.evaluations;
    return log_likelihood(spec, x_path, th);
  };
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = ell(x1), f2 = ell(x2);
  while (b - a > tol) {
    if (f1 >= f2) {
      b = x2, x2 = x1, f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = ell(x1);
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = ell(x2);
    }
  }
  const double th = f1 >= f2 ? x1 : x2;
  const double fv = std::max(f1, f2);
  if (fv > c.ell_hat) {
    c.theta_hat = spec.clamp(th);
    c.ell_hat = fv;
  }
  return c;
}

double fisher_information(const ModelSpec& spec, double theta, double t_from, double t_to, int nodes) {
  if (!(t_to > t_from)) throw EstimationError("Fisher information needs t_from < t_to");
  if (nodes < 2) nodes = 2;
  const double h = (t_to - t_from) / (nodes - 1);
  double acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double w = (k == 0 || k + 1 == nodes) ? 0.5 : 1.0;
    acc += w * fisher_density(spec, theta, t_from + h * k);
  }
  return acc * h;
}

Eigen::VectorXd fisher_cumulative(const ModelSpec& spec, double theta, const Eigen::VectorXd& t, Index k0) {
  Eigen::VectorXd I = Eigen::VectorXd::Zero(t.size());
  if (k0 >= t.size()) return I;
  double prev = fisher_density(spec, theta, t[k0]);
  for (Index k = k0 + 1; k < t.size(); ++k) {
    const double cur = fisher_density(spec, theta, t[k]);
    I[k] = I[k - 1] + 0.5 * (prev + cur) * (t[k] - t[k - 1]);
    prev = cur;
  }
  return I;
}

Eigen::VectorXd kernel_weights(Index L, KernelSide side) {
  if (L < 1) throw EstimationError("kernel window must contain at least one cell");
  Eigen::VectorXd w(L);
  for (Index j = 0; j < L; ++j) {
    // left endpoint of cell j, as a fraction of the window
    const double u = static_cast<double>(j) / static_cast<double>(L);
    w[j] = side == KernelSide::Forward ? 2.0 * (1.0 - u) : 2.0 * u;
  }
  if (w.sum() == 0.0) w.setOnes();
  return w / w.sum();
}

double kernel_smooth(const SamplePath& x_path, double t, double phi, KernelSide side, double t_end) {
  if (!(phi > 0.0)) throw EstimationError("bandwidth must be positive");
  const double dt = x_path.dt();
  const double end = t_end < 0.0 ? x_path.t[x_path.size() - 1] : t_end;
  const Index L = std::max<Index>(1, static_cast<Index>(std::llround(phi / dt)));
  const Index kt = static_cast<Index>(std::llround(t / dt));
  const Index start = side == KernelSide::Forward ? kt : kt - L;
  const Index kend = static_cast<Index>(std::llround(end / dt));
  if (start < 0 || start + L > kend || start + L >= x_path.size())
    throw EstimationError("kernel window exits the observation interval");
  const Eigen::VectorXd w = kernel_weights(L, side);
  double acc = 0.0;
  for (Index j = 0; j < L; ++j) acc += w[j] * (x_path.v[start + j + 1] - x_path.v[start + j]);
  return acc / dt;
}

double psi_function(const ModelSpec& spec, double theta) {
  const int nodes = 2001;
  const double h = spec.tau / (nodes - 1);
  double acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double t = h * k;
    const double fb = spec.f(t) * spec.b(theta, t);
    acc += ((k == 0 || k + 1 == nodes) ? 0.5 : 1.0) * fb * fb;
  }
  return acc * h;
}

PsiInverse invert_psi(const ModelSpec& spec, double psi_hat) {
  PsiInverse r;
  const double lo = spec.theta_lo, hi = spec.theta_hi;
  if (psi_hat <= psi_function(spec, lo)) {
    r.theta = lo;
    r.event = SubstitutionEvent::Below;
    return r;
  }
  if (psi_hat >= psi_function(spec, hi)) {
    r.theta = hi;
    r.event = SubstitutionEvent::Above;
    return r;
  }
  double a = lo, b = hi;
  const double tol = 1e-6 * (hi - lo);
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    (psi_function(spec, mid) < psi_hat ? a : b) = mid;
    ++r.iterations;
  }
  r.theta = 0.5 * (a + b);
  return r;
}

double substitution_bandwidth(const ModelSpec& spec, double scale, double exponent) {
  return std::min(scale * std::pow(spec.epsilon, exponent), spec.tau / 2.5);
}

SubstitutionPieces substitution_estimator(const ModelSpec& spec, const SamplePath& x_path,
                                          double bandwidth_scale, double bandwidth_exponent) {
  const int n_check = 101;
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_check; ++i) {
    const double psi = psi_function(spec, spec.theta_lo + (spec.theta_hi - spec.theta_lo) * i / (n_check - 1));
    if (!(psi > prev)) throw EstimationError("Ψ is not strictly increasing on the parameter interval");
    prev = psi;
  }

  SubstitutionPieces p;
  const Index n = tau_steps(spec, x_path);
  const double dt = x_path.dt();
  p.bandwidth = substitution_bandwidth(spec, bandwidth_scale, bandwidth_exponent);
  const Index L = std::max<Index>(2, static_cast<Index>(std::llround(p.bandwidth / dt)));
  if (2 * L > n) throw EstimationError("bandwidth too large for the learning interval");
  p.window = L;
  p.bandwidth = static_cast<double>(L) * dt;

  p.N_bar = kernel_smooth(x_path, spec.tau, p.bandwidth, KernelSide::Backward, spec.tau);

  // Forward-smoothed derivative N_k and the variance its observation noise carries.
  const Eigen::VectorXd w = kernel_weights(L, KernelSide::Forward);
  const Index nN = n - L + 1;
  p.N.resize(nN);
  Eigen::VectorXd noise_var(nN);
  const double e2 = spec.epsilon * spec.epsilon;
  for (Index k = 0; k < nN; ++k) {
    double acc = 0.0, var = 0.0;
    for (Index j = 0; j < L; ++j) {
      acc += w[j] * (x_path.v[k + j + 1] - x_path.v[k + j]);
      const double s = spec.sigma(x_path.t[k + j]);
      var += w[j] * w[j] * s * s;
    }
    p.N[k] = acc / dt;
    noise_var[k] = e2 * var / dt;
  }

  // N is of finite variation, so the trapezoidal ∫N dN telescopes; kept as a diagnostic.
  p.psi_hat_trapezoid = p.N_bar * p.N_bar - (p.N[nN - 1] * p.N[nN - 1] - p.N[0] * p.N[0]);

  // Pre-averaged estimate: for each phase r the lag-L Itô sums
  // N_last² - N_first² - 2ΣN ΔN equal the sum of squared lag-L increments.
  double kappa = 0.0;
  for (Index i = 0; i < L; ++i)
    for (Index j = 0; j < L; ++j)
      kappa += w[i] * w[j] * (1.0 - std::abs(static_cast<double>(i - j)) / static_cast<double>(L));
  double sum_sq = 0.0, bias = 0.0;
  Index increments = 0;
  for (Index r = 0; r < L; ++r) {
    if (r + L >= nN) break;
    double ito = 0.0;
    Index k = r;
    for (; k + L < nN; k += L) {
      ito += p.N[k] * (p.N[k + L] - p.N[k]);
      bias += noise_var[k] + noise_var[k + L];
      ++increments;
    }
    sum_sq += p.N[k] * p.N[k] - p.N[r] * p.N[r] - 2.0 * ito;
  }
  p.kernel_factor = kappa;
  p.noise_correction = bias;
  const double covered = static_cast<double>(increments) * p.bandwidth;
  p.psi_hat = (sum_sq - bias) / kappa * spec.tau / covered;

  p.psi_lo = psi_function(spec, spec.theta_lo);
  p.psi_hi = psi_function(spec, spec.theta_hi);
  const PsiInverse inv = invert_psi(spec, p.psi_hat);
  p.event = inv.event;
  p.theta_check = inv.theta;
  return p;
}

}  // namespace hbsde
