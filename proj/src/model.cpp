#include "hbsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hbsde {

namespace {

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

// Linear interpolation on ascending knots, constant outside.
double interp1(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return (1.0 - w) * ys[i] + w * ys[i + 1];
}

void require_ascending(const std::vector<double>& xs, const char* what) {
  if (xs.size() < 2) throw ConfigError(std::string(what) + " needs at least two knots");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw ConfigError(std::string(what) + " knots must be increasing");
}

}  // namespace

// ---------------------------------------------------------------------------

TimeFunction TimeFunction::constant(double c) {
  TimeFunction f;
  f.kind_ = Kind::Constant;
  f.coeffs_ = {c};
  return f;
}

TimeFunction TimeFunction::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) throw ConfigError("polynomial needs at least one coefficient");
  TimeFunction f;
  f.kind_ = Kind::Polynomial;
  f.coeffs_ = std::move(coeffs);
  return f;
}

TimeFunction TimeFunction::tabulated(std::vector<double> times, std::vector<double> values) {
  if (times.size() != values.size()) throw ConfigError("tabulated function: size mismatch");
  require_ascending(times, "tabulated function");
  TimeFunction f;
  f.kind_ = Kind::Tabulated;
  f.coeffs_.clear();
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  return f;
}

double TimeFunction::operator()(double t) const {
  switch (kind_) {
    case Kind::Constant:
      return coeffs_.front();
    case Kind::Polynomial:
      return horner(coeffs_, t);
    case Kind::Tabulated:
      return interp1(times_, values_, t);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

VolatilityFunction VolatilityFunction::theta_scaled(std::vector<double> poly, double power) {
  if (poly.empty()) throw ConfigError("theta_scaled volatility needs coefficients");
  VolatilityFunction b;
  b.kind_ = Kind::ThetaScaled;
  b.coeffs_ = std::move(poly);
  b.power_ = power;
  return b;
}

VolatilityFunction VolatilityFunction::tabulated(std::vector<double> thetas,
                                                 std::vector<double> times,
                                                 std::vector<double> values_row_major) {
  require_ascending(thetas, "tabulated volatility (theta)");
  require_ascending(times, "tabulated volatility (time)");
  if (values_row_major.size() != thetas.size() * times.size())
    throw ConfigError("tabulated volatility: values must be len(thetas) x len(times)");
  VolatilityFunction b;
  b.kind_ = Kind::Tabulated;
  b.coeffs_.clear();
  b.power_ = 0.0;
  b.thetas_ = std::move(thetas);
  b.times_ = std::move(times);
  b.values_ = std::move(values_row_major);
  return b;
}

double VolatilityFunction::poly(double t) const { return horner(coeffs_, t); }

double VolatilityFunction::table(double theta, double t) const {
  const std::size_t nt = times_.size();
  auto bracket = [](const std::vector<double>& xs, double x, std::size_t& i, double& w) {
    if (x <= xs.front()) {
      i = 0, w = 0.0;
    } else if (x >= xs.back()) {
      i = xs.size() - 2, w = 1.0;
    } else {
      i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
      w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    }
  };
  std::size_t i = 0, j = 0;
  double wi = 0.0, wj = 0.0;
  bracket(thetas_, theta, i, wi);
  bracket(times_, t, j, wj);
  auto v = [&](std::size_t r, std::size_t c) { return values_[r * nt + c]; };
  return (1 - wi) * ((1 - wj) * v(i, j) + wj * v(i, j + 1)) +
         wi * ((1 - wj) * v(i + 1, j) + wj * v(i + 1, j + 1));
}

double VolatilityFunction::operator()(double theta, double t) const {
  if (kind_ == Kind::Tabulated) return table(theta, t);
  return std::pow(theta, power_) * poly(t);
}

double VolatilityFunction::d_theta(double theta, double t) const {
  if (kind_ == Kind::Tabulated)
    return (table(theta + h_theta_, t) - table(theta - h_theta_, t)) / (2.0 * h_theta_);
  if (power_ == 0.0) return 0.0;
  return power_ * std::pow(theta, power_ - 1.0) * poly(t);
}

double VolatilityFunction::d_theta2(double theta, double t) const {
  if (kind_ == Kind::Tabulated)
    return (table(theta + h_theta_, t) - 2.0 * table(theta, t) + table(theta - h_theta_, t)) /
           (h_theta_ * h_theta_);
  if (power_ == 0.0 || power_ == 1.0) return 0.0;
  return power_ * (power_ - 1.0) * std::pow(theta, power_ - 2.0) * poly(t);
}

// ---------------------------------------------------------------------------

void ModelSpec::validate() const {
  if (!(theta_lo < theta_hi)) throw ConfigError("parameter interval requires theta_lo < theta_hi");
  if (!(T > 0.0)) throw ConfigError("horizon T must be positive");
  if (!(tau > 0.0 && tau < T)) throw ConfigError("τ must lie in (0,T)");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("ε must lie in (0,1]");
  if (!std::isfinite(y0)) throw ConfigError("y0 must be finite");
}

double ModelSpec::clamp(double theta) const { return std::clamp(theta, theta_lo, theta_hi); }

ModelSpec canonical_model(double epsilon) {
  ModelSpec s;
  s.a = TimeFunction::constant(1.0);
  s.b = VolatilityFunction::theta_scaled({1.0}, 1.0);
  s.f = TimeFunction::constant(1.0);
  s.sigma = TimeFunction::constant(1.0);
  s.theta_lo = 0.5;
  s.theta_hi = 2.0;
  s.T = 1.0;
  s.tau = 0.25;
  s.epsilon = epsilon;
  s.y0 = 0.0;
  return s;
}

Index steps_for(double t, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  double n = t / dt;
  double r = std::round(n);
  if (std::abs(n - r) > 1e-6 * std::max(1.0, n) || r < 1.0)
    throw ConfigError("time step must divide the interval length");
  return static_cast<Index>(r);
}

CoefficientGrid sample_coefficients(const ModelSpec& spec, double dt, Index steps) {
  CoefficientGrid g;
  g.dt = dt;
  g.steps = steps;
  g.a.resize(steps + 1);
  g.f.resize(steps + 1);
  g.sigma.resize(steps + 1);
  g.a_mid.resize(steps);
  g.f_mid.resize(steps);
  g.sigma_mid.resize(steps);
  for (Index k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) * dt;
    g.a[k] = spec.a(t);
    g.f[k] = spec.f(t);
    g.sigma[k] = spec.sigma(t);
    if (k < steps) {
      double tm = t + 0.5 * dt;
      g.a_mid[k] = spec.a(tm);
      g.f_mid[k] = spec.f(tm);
      g.sigma_mid[k] = spec.sigma(tm);
    }
  }
  return g;
}

double fisher_density(const ModelSpec& spec, double theta, double t) {
  double bd = spec.b.d_theta(theta, t);
  return spec.f(t) * bd * bd / (2.0 * spec.b(theta, t) * spec.sigma(t));
}

// ---------------------------------------------------------------------------

double Driver::operator()(double, double y, double u, double s) const {
  double g = kind == Kind::Tanh ? cs * std::tanh(s) : cs * s;
  return c0 + cy * y + cu * u + g;
}

double Terminal::operator()(double y) const {
  if (kind == Kind::Cosine) return amplitude * std::cos(frequency * y);
  return horner(coeffs, y);
}

ProblemReport check_problem(const ProblemFunctions& problem, double T, double y_abs, double box,
                            int n) {
  ProblemReport r;
  const double h = 2.0 * box / (n - 1);
  for (int it = 0; it < n; ++it) {
    double t = T * it / (n - 1);
    for (int iy = 0; iy < n; ++iy) {
      double y = -y_abs + 2.0 * y_abs * iy / (n - 1);
      double c = (std::abs(problem.F(t, y, 0.0, 0.0)) + std::abs(problem.Phi(y))) /
                 (1.0 + std::pow(std::abs(y), problem.growth_p));
      r.growth_constant = std::max(r.growth_constant, c);
      for (int iu = 0; iu + 1 < n; ++iu) {
        for (int is = 0; is + 1 < n; ++is) {
          double u = -box + h * iu, s = -box + h * is;
          double base = problem.F(t, y, u, s);
          double du = std::abs(problem.F(t, y, u + h, s) - base) / h;
          double ds = std::abs(problem.F(t, y, u, s + h) - base) / h;
          r.lipschitz_estimate = std::max({r.lipschitz_estimate, du, ds});
        }
      }
    }
  }
  r.lipschitz_pass = r.lipschitz_estimate <= problem.lipschitz * (1.0 + 1e-9);
  return r;
}

// ---------------------------------------------------------------------------

bool PdeGridConfig::operator==(const PdeGridConfig& o) const {
  auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return same(y_min, o.y_min) && same(y_max, o.y_max) && n_y == o.n_y && n_t == o.n_t;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return model == o.model && problem == o.problem && grid_dt == o.grid_dt &&
         pde_grid == o.pde_grid && theta_grid_n == o.theta_grid_n &&
         bandwidth_exponent == o.bandwidth_exponent && bandwidth_scale == o.bandwidth_scale &&
         mc_replicates == o.mc_replicates && seed == o.seed && theta0 == o.theta0 && t0 == o.t0;
}

void ExperimentConfig::validate() const {
  model.validate();
  if (!(grid_dt > 0.0)) throw ConfigError("grid_dt must be positive");
  try {
    steps_for(model.tau, grid_dt);
    steps_for(model.T - model.tau, grid_dt);
  } catch (const ConfigError&) {
    throw ConfigError("grid_dt must divide τ and T-τ");
  }
  if (pde_grid.n_y < 5) throw ConfigError("pde n_y must be at least 5");
  if (pde_grid.n_t < 1) throw ConfigError("pde n_t must be at least 1");
  if (pde_grid.has_domain()) {
    if (!(pde_grid.y_min < model.y0 && model.y0 < pde_grid.y_max))
      throw ConfigError("pde domain must satisfy y_min < y0 < y_max");
  } else if (pde_grid.y_min == pde_grid.y_min || pde_grid.y_max == pde_grid.y_max) {
    throw ConfigError("pde y_min and y_max must be given together");
  }
  if (theta_grid_n < 3) throw ConfigError("theta_grid_n must be at least 3");
  if (!(bandwidth_exponent > 0.0) || !(bandwidth_scale > 0.0))
    throw ConfigError("bandwidth rule needs positive scale and exponent");
  if (mc_replicates < 1) throw ConfigError("mc_replicates must be at least 1");
  if (!model.contains(theta0)) throw ConfigError("theta0 must lie in (theta_lo, theta_hi)");
  if (!(t0 > 0.0 && t0 < model.T)) throw ConfigError("t0 must lie in (0,T)");
}

// ---------------------------------------------------------------------------
// Config text <-> ExperimentConfig

namespace {

const std::set<std::string> kModelKeys = {"theta_lo", "theta_hi", "T", "tau", "epsilon", "y0",
                                          "a", "b", "f", "sigma"};
const std::set<std::string> kProblemKeys = {"growth_p", "lipschitz", "F", "Phi"};
const std::set<std::string> kExperimentKeys = {
    "grid_dt", "theta_grid_n", "bandwidth_exponent", "bandwidth_scale", "mc_replicates",
    "seed",    "theta0",       "t0",                 "pde"};

void reject_unknown(const ConfigDocument& doc, const std::string& prefix,
                    const std::set<std::string>& allowed) {
  for (const auto& k : doc.children(prefix))
    if (!allowed.count(k)) throw ConfigError("unknown key '" + prefix + "." + k + "'");
}

TimeFunction read_time_function(const ConfigDocument& doc, const std::string& key) {
  if (doc.has(key)) return TimeFunction::constant(doc.number(key));
  const std::string kind = doc.at(key + ".kind").as_string(key + ".kind");
  if (kind == "constant") {
    reject_unknown(doc, key, {"kind", "value"});
    return TimeFunction::constant(doc.number(key + ".value"));
  }
  if (kind == "polynomial") {
    reject_unknown(doc, key, {"kind", "coeffs"});
    return TimeFunction::polynomial(doc.at(key + ".coeffs").as_numbers(key + ".coeffs"));
  }
  if (kind == "tabulated") {
    reject_unknown(doc, key, {"kind", "points"});
    std::vector<double> ts, vs;
    for (const auto& p : doc.at(key + ".points").as_array(key + ".points")) {
      auto pair = p.as_numbers(key + ".points");
      if (pair.size() != 2) throw ConfigError("'" + key + ".points' entries must be [t, value]");
      ts.push_back(pair[0]);
      vs.push_back(pair[1]);
    }
    return TimeFunction::tabulated(std::move(ts), std::move(vs));
  }
  throw ConfigError("unknown coefficient kind '" + kind + "' for '" + key + "'");
}

VolatilityFunction read_volatility(const ConfigDocument& doc, const std::string& key) {
  if (doc.has(key)) {
    const auto& v = doc.at(key);
    if (v.is_string() && v.as_string(key) == "theta") return VolatilityFunction::theta_scaled({1.0});
    if (v.is_number()) return VolatilityFunction::theta_scaled({v.as_number(key)}, 0.0);
    throw ConfigError("unknown coefficient name for '" + key + "'");
  }
  const std::string kind = doc.at(key + ".kind").as_string(key + ".kind");
  if (kind == "theta_scaled") {
    reject_unknown(doc, key, {"kind", "coeffs", "power"});
    return VolatilityFunction::theta_scaled(doc.at(key + ".coeffs").as_numbers(key + ".coeffs"),
                                            doc.number_or(key + ".power", 1.0));
  }
  if (kind == "tabulated") {
    reject_unknown(doc, key, {"kind", "thetas", "times", "values"});
    std::vector<double> vals;
    for (const auto& row : doc.at(key + ".values").as_array(key + ".values")) {
      auto r = row.as_numbers(key + ".values");
      vals.insert(vals.end(), r.begin(), r.end());
    }
    return VolatilityFunction::tabulated(doc.at(key + ".thetas").as_numbers(key + ".thetas"),
                                         doc.at(key + ".times").as_numbers(key + ".times"),
                                         std::move(vals));
  }
  throw ConfigError("unknown coefficient kind '" + kind + "' for '" + key + "'");
}

Driver read_driver(const ConfigDocument& doc) {
  const std::string key = "problem.F";
  const std::string kind = doc.string_or(key + ".kind", "zero");
  Driver d;
  if (kind == "zero") {
    reject_unknown(doc, key, {"kind"});
    return d;
  }
  if (kind != "linear" && kind != "tanh") throw ConfigError("unknown driver kind '" + kind + "'");
  reject_unknown(doc, key, {"kind", "c0", "cy", "cu", "cs"});
  d.kind = kind == "tanh" ? Driver::Kind::Tanh : Driver::Kind::Linear;
  d.c0 = doc.number_or(key + ".c0", 0.0);
  d.cy = doc.number_or(key + ".cy", 0.0);
  d.cu = doc.number_or(key + ".cu", 0.0);
  d.cs = doc.number_or(key + ".cs", 0.0);
  return d;
}

Terminal read_terminal(const ConfigDocument& doc) {
  const std::string key = "problem.Phi";
  const std::string kind = doc.at(key + ".kind").as_string(key + ".kind");
  if (kind == "polynomial") {
    reject_unknown(doc, key, {"kind", "coeffs"});
    return Terminal::polynomial(doc.at(key + ".coeffs").as_numbers(key + ".coeffs"));
  }
  if (kind == "cosine") {
    reject_unknown(doc, key, {"kind", "amplitude", "frequency"});
    return Terminal::cosine(doc.number_or(key + ".amplitude", 1.0),
                            doc.number_or(key + ".frequency", 1.0));
  }
  throw ConfigError("unknown terminal kind '" + kind + "'");
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string nums(const std::vector<double>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + num(xs[i]);
  return out + "]";
}

void write_time_function(std::ostream& os, const std::string& key, const TimeFunction& fn) {
  os << "\n[" << key << "]\n";
  switch (fn.kind()) {
    case TimeFunction::Kind::Constant:
      os << "kind = \"constant\"\nvalue = " << num(fn.coeffs().front()) << "\n";
      break;
    case TimeFunction::Kind::Polynomial:
      os << "kind = \"polynomial\"\ncoeffs = " << nums(fn.coeffs()) << "\n";
      break;
    case TimeFunction::Kind::Tabulated: {
      os << "kind = \"tabulated\"\npoints = [";
      for (std::size_t i = 0; i < fn.times().size(); ++i)
        os << (i ? ", " : "") << "[" << num(fn.times()[i]) << ", " << num(fn.values()[i]) << "]";
      os << "]\n";
      break;
    }
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& text) {
  ConfigDocument doc = ConfigDocument::parse(text);
  for (const auto& top : doc.children(""))
    if (top != "model" && top != "problem" && top != "experiment")
      throw ConfigError("unknown table '" + top + "'");
  reject_unknown(doc, "model", kModelKeys);
  reject_unknown(doc, "problem", kProblemKeys);
  reject_unknown(doc, "experiment", kExperimentKeys);

  ExperimentConfig cfg;
  ModelSpec& m = cfg.model;
  m.theta_lo = doc.number("model.theta_lo");
  m.theta_hi = doc.number("model.theta_hi");
  m.T = doc.number("model.T");
  m.tau = doc.number("model.tau");
  m.epsilon = doc.number("model.epsilon");
  m.y0 = doc.number_or("model.y0", 0.0);
  m.a = read_time_function(doc, "model.a");
  m.f = read_time_function(doc, "model.f");
  m.sigma = read_time_function(doc, "model.sigma");
  m.b = read_volatility(doc, "model.b");
  m.b.set_difference_step(1e-4 * (m.theta_hi - m.theta_lo));

  cfg.problem.growth_p = doc.number_or("problem.growth_p", 1.0);
  cfg.problem.lipschitz = doc.number_or("problem.lipschitz", 1.0);
  cfg.problem.F = read_driver(doc);
  cfg.problem.Phi = doc.has("problem.Phi.kind") ? read_terminal(doc) : Terminal::polynomial({0, 1});

  cfg.grid_dt = doc.number_or("experiment.grid_dt", 1e-4 * m.T);
  cfg.theta_grid_n = static_cast<int>(doc.number_or("experiment.theta_grid_n", 41));
  cfg.bandwidth_exponent = doc.number_or("experiment.bandwidth_exponent", 1.0);
  cfg.bandwidth_scale = doc.number_or("experiment.bandwidth_scale", 1.5);
  cfg.mc_replicates = static_cast<int>(doc.number_or("experiment.mc_replicates", 1));
  if (doc.has("experiment.seed")) cfg.seed = doc.at("experiment.seed").as_u64("experiment.seed");
  cfg.theta0 = doc.number_or("experiment.theta0", 0.5 * (m.theta_lo + m.theta_hi));
  cfg.t0 = doc.number_or("experiment.t0", 0.1 * m.T);
  reject_unknown(doc, "experiment.pde", {"y_min", "y_max", "n_y", "n_t"});
  cfg.pde_grid.y_min = doc.number_or("experiment.pde.y_min", cfg.pde_grid.y_min);
  cfg.pde_grid.y_max = doc.number_or("experiment.pde.y_max", cfg.pde_grid.y_max);
  cfg.pde_grid.n_y = static_cast<int>(doc.number_or("experiment.pde.n_y", cfg.pde_grid.n_y));
  cfg.pde_grid.n_t = static_cast<int>(doc.number_or("experiment.pde.n_t", cfg.pde_grid.n_t));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = load_config(ss.str());
  apply_seed_environment(cfg);
  return cfg;
}

void apply_seed_environment(ExperimentConfig& cfg) {
  if (const char* env = std::getenv("HBSDE_SEED")) {
    char* end = nullptr;
    unsigned long long s = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("HBSDE_SEED must be an unsigned integer");
    cfg.seed = s;
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const ModelSpec& m = cfg.model;
  os << "[model]\n"
     << "theta_lo = " << num(m.theta_lo) << "\n"
     << "theta_hi = " << num(m.theta_hi) << "\n"
     << "T = " << num(m.T) << "\n"
     << "tau = " << num(m.tau) << "\n"
     << "epsilon = " << num(m.epsilon) << "\n"
     << "y0 = " << num(m.y0) << "\n";
  write_time_function(os, "model.a", m.a);
  write_time_function(os, "model.f", m.f);
  write_time_function(os, "model.sigma", m.sigma);
  os << "\n[model.b]\n";
  if (m.b.kind() == VolatilityFunction::Kind::ThetaScaled) {
    os << "kind = \"theta_scaled\"\npower = " << num(m.b.power())
       << "\ncoeffs = " << nums(m.b.coeffs()) << "\n";
  } else {
    os << "kind = \"tabulated\"\nthetas = " << nums(m.b.thetas())
       << "\ntimes = " << nums(m.b.times()) << "\nvalues = [";
    const std::size_t nt = m.b.times().size();
    for (std::size_t i = 0; i < m.b.thetas().size(); ++i) {
      std::vector<double> row(m.b.values().begin() + static_cast<long>(i * nt),
                              m.b.values().begin() + static_cast<long>((i + 1) * nt));
      os << (i ? ", " : "") << nums(row);
    }
    os << "]\n";
  }

  const ProblemFunctions& p = cfg.problem;
  os << "\n[problem]\ngrowth_p = " << num(p.growth_p) << "\nlipschitz = " << num(p.lipschitz)
     << "\n\n[problem.F]\n";
  if (p.F.is_zero() && p.F.kind == Driver::Kind::Linear) {
    os << "kind = \"zero\"\n";
  } else {
    os << "kind = \"" << (p.F.kind == Driver::Kind::Tanh ? "tanh" : "linear") << "\"\n"
       << "c0 = " << num(p.F.c0) << "\ncy = " << num(p.F.cy) << "\ncu = " << num(p.F.cu)
       << "\ncs = " << num(p.F.cs) << "\n";
  }
  os << "\n[problem.Phi]\n";
  if (p.Phi.kind == Terminal::Kind::Cosine) {
    os << "kind = \"cosine\"\namplitude = " << num(p.Phi.amplitude)
       << "\nfrequency = " << num(p.Phi.frequency) << "\n";
  } else {
    os << "kind = \"polynomial\"\ncoeffs = " << nums(p.Phi.coeffs) << "\n";
  }

  os << "\n[experiment]\n"
     << "grid_dt = " << num(cfg.grid_dt) << "\n"
     << "theta_grid_n = " << cfg.theta_grid_n << "\n"
     << "bandwidth_exponent = " << num(cfg.bandwidth_exponent) << "\n"
     << "bandwidth_scale = " << num(cfg.bandwidth_scale) << "\n"
     << "mc_replicates = " << cfg.mc_replicates << "\n"
     << "seed = " << cfg.seed << "\n"
     << "theta0 = " << num(cfg.theta0) << "\n"
     << "t0 = " << num(cfg.t0) << "\n"
     << "\n[experiment.pde]\n";
  if (cfg.pde_grid.has_domain())
    os << "y_min = " << num(cfg.pde_grid.y_min) << "\ny_max = " << num(cfg.pde_grid.y_max) << "\n";
  os << "n_y = " << cfg.pde_grid.n_y << "\nn_t = " << cfg.pde_grid.n_t << "\n";
  return os.str();
}

ExperimentConfig canonical_config(double epsilon) {
  ExperimentConfig cfg;
  cfg.model = canonical_model(epsilon);
  cfg.problem.F = Driver::zero();
  cfg.problem.Phi = Terminal::polynomial({0.0, 0.0, 1.0});
  cfg.problem.growth_p = 2.0;
  cfg.problem.lipschitz = 1.0;
  cfg.grid_dt = 1e-4;
  cfg.theta_grid_n = 61;  // puts θ0 = 1 on a node
  cfg.mc_replicates = 500;
  cfg.seed = 20240917;
  cfg.theta0 = 1.0;
  cfg.t0 = 0.1;
  return cfg;
}

// ---------------------------------------------------------------------------

ConditionsReport validate_conditions(const ModelSpec& spec, int n_check) {
  if (n_check < 2) throw ConfigError("n_check must be at least 2");
  ConditionsReport r;
  r.min_b = r.min_f = r.min_sigma = std::numeric_limits<double>::infinity();
  r.finite = true;
  const double span = spec.theta_hi - spec.theta_lo;
  const double h = 1e-4 * span;
  r.theta_grid.resize(n_check);
  for (int i = 0; i < n_check; ++i) {
    double theta = spec.theta_lo + span * i / (n_check - 1);
    r.theta_grid[i] = theta;
    for (int j = 0; j < n_check; ++j) {
      double t = spec.T * j / (n_check - 1);
      double b = spec.b(theta, t), f = spec.f(t), s = spec.sigma(t);
      double bd = spec.b.d_theta(theta, t);
      r.finite = r.finite && std::isfinite(b) && std::isfinite(f) && std::isfinite(s) &&
                 std::isfinite(spec.a(t)) && std::isfinite(bd);
      r.min_b = std::min(r.min_b, b);
      r.min_f = std::min(r.min_f, f);
      r.min_sigma = std::min(r.min_sigma, s);
      double fd = (spec.b(theta + h, t) - spec.b(theta - h, t)) / (2.0 * h);
      r.max_derivative_gap = std::max(r.max_derivative_gap, std::abs(fd - bd));
    }
  }
  r.positivity_pass = r.min_b > 0.0 && r.min_f > 0.0 && r.min_sigma > 0.0;

  // I^τ(θ) by the trapezoidal rule.
  const int nodes = 2001;
  r.fisher.resize(n_check);
  for (int i = 0; i < n_check; ++i) {
    double acc = 0.0;
    for (int k = 0; k < nodes; ++k) {
      double w = (k == 0 || k == nodes - 1) ? 0.5 : 1.0;
      double dens = fisher_density(spec, r.theta_grid[i], spec.tau * k / (nodes - 1));
      acc += w * (std::isfinite(dens) ? dens : 0.0);
    }
    r.fisher[i] = acc * spec.tau / (nodes - 1);
  }
  r.min_fisher = r.fisher.minCoeff();
  r.fisher_pass = r.min_fisher > 0.0;
  return r;
}

}  // namespace hbsde
