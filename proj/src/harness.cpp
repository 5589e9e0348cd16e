#include "magweyl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "magweyl/dirac_energy.hpp"
#include "magweyl/dynamics.hpp"
#include "magweyl/errors.hpp"
#include "magweyl/format.hpp"
#include "magweyl/kernels.hpp"
#include "magweyl/landau.hpp"
#include "magweyl/parallel.hpp"
#include "magweyl/perturbation.hpp"
#include "magweyl/regimes.hpp"

namespace magweyl::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw InvalidInput("config: '" + key + "' is not a number: '" + text + "'");
}

// Runs body(i) for every row; a NumericalError, InvalidInput or RangeError
// marks the row failed instead of aborting the sweep.
void fill_rows(Table& t, std::size_t n, int workers, const std::function<std::vector<double>(std::size_t)>& body) {
  t.rows.assign(n, std::vector<double>(t.columns.size(), kNaN));
  t.status.assign(n, "ok");
  parallel_for(
      n,
      [&](std::size_t i) {
        try {
          auto row = body(i);
          row.resize(t.columns.size(), kNaN);
          t.rows[i] = std::move(row);
        } catch (const NumericalError& e) {
          t.status[i] = std::string("failed: ") + e.what();
        } catch (const std::invalid_argument& e) {
          t.status[i] = std::string("failed: ") + e.what();
        } catch (const std::out_of_range& e) {
          t.status[i] = std::string("failed: ") + e.what();
        }
      },
      workers);
}

nlohmann::json fits_json(const SweepResult& r) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [label, fit] : r.fits) {
    auto f = to_json(fit);
    f["label"] = label;
    j.push_back(f);
  }
  return j;
}

void add_fit(SweepResult& r, const std::string& label, const std::vector<std::pair<double, double>>& pts) {
  try {
    r.fits.emplace_back(label, fit_power_law(pts));
  } catch (const InsufficientData&) {
  } catch (const InvalidInput&) {
  }
}

}  // namespace

PowerFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw InsufficientData("fit_power_law: need at least 3 points");
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
      throw InvalidInput("fit_power_law: values must be positive and finite");
    }
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  auto sorted = lx;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw InvalidInput("fit_power_law: repeated x");
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  PowerFit f;
  f.n_points = static_cast<int>(lx.size());
  f.exponent = sxy / sxx;
  f.log_intercept = my - f.exponent * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.log_intercept + f.exponent * lx[i]);
    sse += r * r;
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  return f;
}

nlohmann::json to_json(const PowerFit& f) {
  return {{"exponent", format_real(f.exponent)},
          {"log_intercept", format_real(f.log_intercept)},
          {"r_squared", format_real(f.r_squared)},
          {"n_points", f.n_points}};
}

Config Config::parse(std::istream& is) {
  // '#' comments are dropped here; the ini reader handles ';'.
  std::stringstream cleaned;
  std::string line;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (!t.empty() && t.front() == '#') continue;
    cleaned << line << '\n';
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  Config c;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      c.values_[name] = trim(node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) c.values_[name + "." + key] = trim(leaf.data());
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open '" + path + "'");
  return parse(in);
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number(key, it->second);
}

long long Config::integer(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (trim(it->second.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw InvalidInput("config: '" + key + "' is not an integer: '" + it->second + "'");
}

std::vector<double> Config::numbers(const std::string& key) const {
  std::vector<double> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(parse_number(key, trim(item)));
  }
  return out;
}

std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::dirac_gap: return "dirac_gap";
    case Quantity::kernel_trace: return "kernel_trace";
    case Quantity::drift_error: return "drift_error";
    case Quantity::intersection_count: return "intersection_count";
    case Quantity::duhamel_residual: return "duhamel_residual";
  }
  return "?";
}

Quantity quantity_from_string(std::string_view s) {
  for (auto q : {Quantity::dirac_gap, Quantity::kernel_trace, Quantity::drift_error, Quantity::intersection_count,
                 Quantity::duhamel_residual}) {
    if (s == to_string(q)) return q;
  }
  throw InvalidInput("unknown sweep quantity '" + std::string(s) + "'");
}

SweepConfig SweepConfig::from_config(const Config& c) {
  SweepConfig s;
  s.quantity = quantity_from_string(c.text("sweep.quantity", "dirac_gap"));
  if (c.has("sweep.mu")) s.mu = c.numbers("sweep.mu");
  s.h = c.numbers("sweep.h");
  for (double k : c.numbers("sweep.ladder_k")) {
    if (k != std::floor(k)) throw InvalidInput("config: ladder_k entries must be integers");
    s.ladder_k.push_back(static_cast<int>(k));
  }
  s.kappa = c.number("sweep.kappa", s.kappa);
  s.seed = static_cast<std::uint64_t>(c.integer("sweep.seed", static_cast<long long>(s.seed)));
  s.workers = static_cast<int>(c.integer("sweep.workers", 0));
  s.output = c.text("sweep.output", "");
  s.W = c.number("model.W", s.W);
  const auto path = c.text("model.path", "radial");
  if (path == "radial") {
    s.path = DiracPath::radial;
  } else if (path == "full") {
    s.path = DiracPath::full;
  } else {
    throw InvalidInput("config: model.path must be radial or full");
  }
  s.sigma = c.number("cutoff.sigma", s.sigma);
  s.gradient = c.number("geometry.gradient", s.gradient);
  s.periods = static_cast<int>(c.integer("geometry.periods", s.periods));
  s.instances = static_cast<int>(c.integer("duhamel.instances", s.instances));
  s.t = c.number("duhamel.t", s.t);
  s.nu = c.number("duhamel.nu", s.nu);
  s.validate();
  return s;
}

void SweepConfig::validate() const {
  if (mu.empty()) throw InvalidInput("sweep: mu grid is empty");
  for (double m : mu) {
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidInput("sweep: mu values must be positive");
  }
  const bool needs_h = quantity == Quantity::dirac_gap || quantity == Quantity::kernel_trace ||
                       quantity == Quantity::duhamel_residual;
  if (needs_h && h.empty() && ladder_k.empty()) throw InvalidInput("sweep: h grid is empty");
  if (!h.empty() && !ladder_k.empty()) throw InvalidInput("sweep: give either h or ladder_k");
  auto hs = h;
  std::sort(hs.begin(), hs.end());
  if (std::adjacent_find(hs.begin(), hs.end()) != hs.end()) throw InvalidInput("sweep: h values must be distinct");
  for (double v : h) {
    if (!(v > 0.0) || !(v <= 1.0)) throw InvalidInput("sweep: h values must lie in (0, 1]");
  }
  for (int k : ladder_k) {
    if (k < 0) throw InvalidInput("sweep: ladder_k must be nonnegative");
  }
  if (!(kappa > 0.0) || !(kappa < 2.0)) throw InvalidInput("sweep: kappa must lie in (0, 2)");
  if (!(sigma > 0.0) || !(W > 0.0)) throw InvalidInput("sweep: sigma and W must be positive");
  if (!std::isfinite(gradient) || periods < 1) throw InvalidInput("sweep: bad geometry settings");
  if (instances < 1 || !(t > 0.0) || !(nu >= 0.0)) throw InvalidInput("sweep: bad duhamel settings");
}

std::vector<std::pair<double, double>> SweepConfig::cells() const {
  std::vector<std::pair<double, double>> out;
  for (double m : mu) {
    if (!ladder_k.empty()) {
      for (int k : ladder_k) out.emplace_back(m, 1.0 / (m * (2.0 * k + 0.5)));
    } else if (h.empty()) {
      out.emplace_back(m, kNaN);
    } else {
      for (double v : h) out.emplace_back(m, v);
    }
  }
  return out;
}

nlohmann::json SweepConfig::to_json() const {
  auto reals = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(format_real(x));
    return a;
  };
  return {{"quantity", std::string(harness::to_string(quantity))},
          {"mu", reals(mu)},
          {"h", reals(h)},
          {"ladder_k", ladder_k},
          {"kappa", format_real(kappa)},
          {"sigma", format_real(sigma)},
          {"W", format_real(W)},
          {"path", path == DiracPath::radial ? "radial" : "full"},
          {"gradient", format_real(gradient)},
          {"periods", periods},
          {"instances", instances},
          {"t", format_real(t)},
          {"nu", format_real(nu)},
          {"seed", seed},
          {"output", output}};
}

std::size_t Table::failed() const {
  return static_cast<std::size_t>(std::count_if(status.begin(), status.end(), [](const auto& s) { return s != "ok"; }));
}

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw RangeError("table: no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

void Table::write_csv(std::ostream& os) const {
  for (const auto& c : columns) os << c << ',';
  os << "status\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (double v : rows[i]) os << format_real(v) << ',';
    std::string s = status[i];
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    os << s << '\n';
  }
}

void Table::write_dat(std::ostream& os) const {
  os << '#';
  for (const auto& c : columns) os << ' ' << c;
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << format_real(row[j]);
    os << '\n';
  }
}

std::vector<std::pair<double, double>> Table::series(const std::string& x, const std::string& y,
                                                     const std::string& key, double key_value) const {
  const auto ix = column(x), iy = column(y);
  const auto ik = key.empty() ? 0 : column(key);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (status[i] != "ok") continue;
    if (!key.empty() && rows[i][ik] != key_value) continue;
    if (std::isfinite(rows[i][ix]) && std::isfinite(rows[i][iy])) out.emplace_back(rows[i][ix], rows[i][iy]);
  }
  return out;
}

SweepResult sweep_dirac_gap(const SweepConfig& cfg) {
  cfg.validate();
  const auto cells = cfg.cells();
  SweepResult r;
  r.table.columns = {"mu", "h", "kappa", "I_exact", "I_weyl", "gap", "rel_gap", "remainder", "log_factor"};
  const auto c = dirac::CutoffPair::gaussian(cfg.sigma);
  const auto w = dirac::SingularWeight::isotropic(cfg.kappa);
  fill_rows(r.table, cells.size(), cfg.workers, [&](std::size_t i) {
    const auto [mu, h] = cells[i];
    kernels::ModelParams p;
    p.mu = mu;
    p.h = h;
    p.W = cfg.W;
    p.n_max = kernels::default_n_max(mu, h, cfg.W) + 1;
    p.validate();
    const auto qm = dirac::model_quadrature(p, c);
    const auto qw = dirac::weyl_quadrature(cfg.W, h, 0.0, c);
    double exact = 0.0, weyl = 0.0;
    if (cfg.path == DiracPath::radial) {
      exact = dirac::radial_dirac_energy(p, w, c, qm);
      weyl = dirac::radial_weyl_reference(cfg.W, h, 0.0, w, c, qw);
    } else {
      kernels::KernelOptions ko;
      ko.verify = false;
      const kernels::ModelKernel k(p, ko);
      exact = dirac::dirac_energy([&](const Vec2& x, const Vec2& y) { return k(x, y); }, w, c, qm);
      weyl = dirac::weyl_reference(cfg.W, h, 0.0, Mat2::Identity(), w, c, qw);
    }
    const double gap = std::abs(exact - weyl);
    const double rem = h < 1.0 ? regimes::remainder_estimate(mu, h, cfg.kappa).value : kNaN;
    return std::vector<double>{mu, h, cfg.kappa, exact, weyl, gap, gap / weyl, rem, cfg.kappa == 1.0 ? 1.0 : 0.0};
  });
  for (double mu : cfg.mu) add_fit(r, "rel_gap_vs_h@mu=" + format_real(mu), r.table.series("h", "rel_gap", "mu", mu));
  r.summary = {{"quantity", "dirac_gap"}, {"failed", r.table.failed()}, {"fits", fits_json(r)}};
  if (cfg.kappa == 1.0) r.summary["note"] = "kappa = 1 carries an extra logarithmic factor in the remainder";
  return r;
}

SweepResult sweep_kernel_trace(const SweepConfig& cfg) {
  cfg.validate();
  const auto cells = cfg.cells();
  SweepResult r;
  r.table.columns = {"mu", "h", "W", "levels", "diagonal", "weyl_density", "rel_err"};
  fill_rows(r.table, cells.size(), cfg.workers, [&](std::size_t i) {
    const auto [mu, h] = cells[i];
    kernels::ModelParams p;
    p.mu = mu;
    p.h = h;
    p.W = cfg.W;
    p.n_max = kernels::default_n_max(mu, h, cfg.W) + 1;
    p.validate();
    landau::ModelScalars s;
    s.mu = mu;
    s.h = h;
    s.V = cfg.W;
    const double diag = kernels::ModelKernel(p).diagonal(Vec2(0.0, 0.0));
    const double mw = landau::magnetic_weyl_density(s);
    return std::vector<double>{mu, h, cfg.W, static_cast<double>(landau::level_count(s)), diag, mw,
                               std::abs(diag - mw) / mw};
  });
  r.summary = {{"quantity", "kernel_trace"}, {"failed", r.table.failed()}};
  return r;
}

SweepResult sweep_geometry(const SweepConfig& cfg) {
  cfg.validate();
  SweepResult r;
  const auto n = cfg.mu.size();
  if (cfg.quantity == Quantity::drift_error) {
    r.table.columns = {"mu", "gradient", "measured", "predicted", "literal", "rel_err", "rel_err_literal"};
    fill_rows(r.table, n, cfg.workers, [&](std::size_t i) {
      const double mu = cfg.mu[i];
      const auto f = dynamics::ModelField::linear(mu, 1.0, 1.0, Vec2(0.0, cfg.gradient));
      const auto traj = dynamics::integrate_flow(f, dynamics::energy_shell_state(f, Vec2(0, 0), 0.0),
                                                 cfg.periods * 2.0 * kPi / mu);
      const Vec2 m = dynamics::measured_drift(traj);
      const Vec2 p = dynamics::predicted_drift(f, Vec2(0, 0));
      const Vec2 l = dynamics::drift_velocity(f, Vec2(0, 0));
      const double rel = p.norm() > 0.0 ? (m - p).norm() / p.norm() : m.norm();
      const double rel_l = l.norm() > 0.0 ? std::abs(m.norm() - l.norm()) / l.norm() : m.norm();
      return std::vector<double>{mu, cfg.gradient, m.norm(), p.norm(), l.norm(), rel, rel_l};
    });
    r.summary = {{"quantity", "drift_error"}, {"failed", r.table.failed()}};
    return r;
  }
  if (cfg.quantity != Quantity::intersection_count) throw InvalidInput("sweep_geometry: unsupported quantity");
  r.table.columns = {"mu", "gradient", "windings", "events", "mid_winding", "mid_count", "count_over_mu"};
  fill_rows(r.table, n, cfg.workers, [&](std::size_t i) {
    const double mu = cfg.mu[i];
    const auto f = dynamics::ModelField::linear(mu, 1.0, 1.0, Vec2(0.0, cfg.gradient));
    // Enough windings for the middle one to meet every neighbour it can reach.
    const double nbar = cfg.gradient != 0.0 ? 2.0 * mu / (kPi * std::abs(cfg.gradient)) : 0.0;
    const double turns = cfg.gradient != 0.0 ? 2.0 * nbar + 4.0 : static_cast<double>(cfg.periods);
    const auto traj =
        dynamics::integrate_flow(f, dynamics::energy_shell_state(f, Vec2(0, 0), 0.0), turns * 2.0 * kPi / mu);
    const auto events = dynamics::self_intersections(traj);
    const int mid = traj.windings() / 2;
    const int count = dynamics::intersections_on_winding(events, mid);
    return std::vector<double>{mu,  cfg.gradient, static_cast<double>(traj.windings()), static_cast<double>(events.size()),
                               static_cast<double>(mid), static_cast<double>(count), count / mu};
  });
  add_fit(r, "mid_count_vs_mu", r.table.series("mu", "mid_count"));
  r.summary = {{"quantity", "intersection_count"}, {"failed", r.table.failed()}, {"fits", fits_json(r)}};
  return r;
}

SweepResult sweep_duhamel_residual(const SweepConfig& cfg) {
  cfg.validate();
  const double h = cfg.ladder_k.empty() ? cfg.h.front() : cfg.cells().front().second;
  const auto n = static_cast<std::size_t>(cfg.instances) * 3;
  SweepResult r;
  r.table.columns = {"instance", "K", "dim", "h", "t", "nu", "residual", "bound", "ratio"};
  fill_rows(r.table, n, cfg.workers, [&](std::size_t i) {
    const int inst = static_cast<int>(i / 3);
    const int K = static_cast<int>(i % 3) + 1;
    const int dim = 4 + inst % 9;
    const auto base = cfg.seed * 1000003ULL + 2ULL * static_cast<std::uint64_t>(inst);
    const auto A = perturbation::random_hermitian(dim, 1.0, base);
    const auto B = perturbation::random_hermitian(dim, cfg.nu, base + 1);
    const auto U = perturbation::propagator(perturbation::OperatorMatrix::from(A.entries + B.entries), cfg.t, h);
    const auto S = perturbation::duhamel_series(A, B, cfg.t, h, K);
    const double res = perturbation::op_norm(U.entries - S.approx.entries);
    const double bound = perturbation::remainder_check(cfg.nu, cfg.t, h, K, 0.0).bound;
    return std::vector<double>{static_cast<double>(inst), static_cast<double>(K), static_cast<double>(dim), h,
                               cfg.t, cfg.nu, res, bound, bound > 0.0 ? res / bound : 0.0};
  });
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.table.status[i] == "ok") worst = std::max(worst, r.table.rows[i].back());
  }
  r.summary = {{"quantity", "duhamel_residual"}, {"failed", r.table.failed()}, {"max_ratio", format_real(worst)}};
  return r;
}

SweepResult run_sweep(const SweepConfig& cfg) {
  switch (cfg.quantity) {
    case Quantity::dirac_gap: return sweep_dirac_gap(cfg);
    case Quantity::kernel_trace: return sweep_kernel_trace(cfg);
    case Quantity::drift_error:
    case Quantity::intersection_count: return sweep_geometry(cfg);
    case Quantity::duhamel_residual: return sweep_duhamel_residual(cfg);
  }
  throw InvalidInput("run_sweep: unknown quantity");
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& parameters,
                             const std::vector<std::string>& outputs, std::uint64_t seed, double wall_seconds) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return {{"tool", "magweyl"},
          {"version", std::string(kVersion)},
          {"command", command},
          {"parameters", parameters},
          {"seed", seed},
          {"outputs", outputs},
          {"workers", worker_count()},
          {"wall_seconds", format_real(wall_seconds)},
          {"finished_utc", stamp}};
}

std::vector<CheckLine> selftest() {
  std::vector<CheckLine> out;
  auto check = [&](std::string name, double value, double tol) {
    out.push_back({std::move(name), value, tol, std::isfinite(value) && value <= tol});
  };

  landau::ModelScalars s;
  s.mu = 10.0;
  s.h = 0.02;
  s.V = 1.0;
  check("landau_level_count", std::abs(static_cast<double>(landau::level_count(s)) - 3.0), 0.0);
  check("magnetic_weyl_density", std::abs(landau::magnetic_weyl_density(s) - 238.732) / 238.732, 1e-5);

  kernels::ModelParams p;
  p.mu = 2.0;
  p.h = 0.1;
  p.W = 1.0;
  p.n_max = kernels::default_n_max(p.mu, p.h, p.W) + 1;
  s.mu = p.mu;
  s.h = p.h;
  const double mw = landau::magnetic_weyl_density(s);
  check("trace_identity", std::abs(kernels::ModelKernel(p).diagonal(Vec2(0.3, -0.2)) - mw) / mw, 1e-8);

  const Vec2 x(0.1, -0.2), y(0.35, 0.15);
  Complex sum(0.0, 0.0);
  for (int n = 0; n < kernels::default_n_max(p.mu, p.h, p.W); ++n) sum += kernels::landau_projector_kernel(n, p.mu, p.h, x, y);
  check("hermite_vs_laguerre", std::abs(kernels::model_kernel(p, x, y) - sum) / mw, 1e-8);
  check("kernel_hermitian", std::abs(kernels::model_kernel(p, x, y) - std::conj(kernels::model_kernel(p, y, x))) / mw,
        1e-10);

  const auto c = dirac::CutoffPair::gaussian(0.5);
  const auto w = dirac::SingularWeight::isotropic(1.0);
  const double gauss = 2.0 * kPi * kPi * 0.25 * 0.5 * std::sqrt(4.0 * 0.25) * std::tgamma(0.5);
  const auto qc = dirac::default_quadrature(c, 0.5, 0.1);
  const double ic = dirac::radial_dirac_energy([](double) { return 1.0; }, w, c, qc);
  check("dirac_closed_form", std::abs(ic - gauss) / gauss, 1e-6);
  const double wr = dirac::radial_weyl_reference(1.0, 0.2, 0.0, w, c, dirac::weyl_quadrature(1.0, 0.2, 0.0, c));
  const double wf = dirac::radial_dirac_energy([](double r) { return dirac::weyl_kernel_sq(1.0, 0.2, 0.0, r); }, w, c,
                                               dirac::weyl_quadrature(1.0, 0.2, 0.0, c));
  check("weyl_self_gap", std::abs(wr - wf) / wr, 1e-12);

  auto [Z, Zs] = perturbation::build_ladder(6, 2, 2.0, 0.1);
  const Eigen::MatrixXcd comm = Zs.entries * Z.entries - Z.entries * Zs.entries;
  check("ladder_commutator",
        (comm.topLeftCorner(10, 10) - 0.4 * Eigen::MatrixXcd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
  const auto A0 = perturbation::OperatorMatrix::from(0.5 * Zs.entries * Z.entries);
  const Eigen::MatrixXcd rot = perturbation::heisenberg_evolve(A0, Z, 0.7, 0.1).entries - std::polar(1.0, 1.4) * Z.entries;
  check("heisenberg_rotation", rot.topLeftCorner(10, 10).cwiseAbs().maxCoeff(), 1e-9);

  const auto A = perturbation::random_hermitian(6, 1.0, 11), B = perturbation::random_hermitian(6, 0.3, 12);
  const auto U = perturbation::propagator(perturbation::OperatorMatrix::from(A.entries + B.entries), 0.2, 0.1);
  const auto S2 = perturbation::duhamel_series(A, B, 0.2, 0.1, 2);
  check("duhamel_bound_ratio",
        perturbation::op_norm(U.entries - S2.approx.entries) / perturbation::remainder_check(0.3, 0.2, 0.1, 2, 0.0).bound,
        1.0);

  const auto rep = regimes::thresholds(10.0, 1e-4, 2, 0.0);
  check("regimes_T_star", std::abs(rep.T_star - 0.01), 1e-15);
  check("regimes_boundary", std::abs(regimes::weak_boundary(1e-4) - 5.741) / 5.741, 2e-4);

  const auto f = dynamics::ModelField::linear(10.0, 1.0, 1.0);
  const auto s0 = dynamics::energy_shell_state(f, Vec2(0, 0), 0.0);
  const auto traj = dynamics::integrate_flow(f, s0, 10.0 * 2.0 * kPi / 10.0);
  check("circle_closure", (traj.states.back().x - s0.x).norm(), 1e-8);
  check("energy_drift", traj.max_energy_drift, 1e-9);

  check("power_fit_exact",
        std::abs(fit_power_law({{1.0, 3.0}, {2.0, 3.0 * std::pow(2.0, 1.5)}, {4.0, 24.0}, {8.0, 3.0 * std::pow(8.0, 1.5)}})
                     .exponent -
                 1.5),
        1e-12);
  return out;
}

void write_checks_csv(std::ostream& os, const std::vector<CheckLine>& lines) {
  os << "check,value,tolerance,pass\n";
  for (const auto& l : lines) os << l.name << ',' << format_real(l.value) << ',' << format_real(l.tolerance) << ',' << (l.pass ? 1 : 0) << '\n';
}

}  // namespace magweyl::harness
