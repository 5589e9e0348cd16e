#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "magweyl/dirac_energy.hpp"
#include "magweyl/dynamics.hpp"
#include "magweyl/errors.hpp"
#include "magweyl/format.hpp"
#include "magweyl/harness.hpp"
#include "magweyl/kernels.hpp"
#include "magweyl/landau.hpp"
#include "magweyl/regimes.hpp"

using namespace magweyl;

namespace {

constexpr int kConfigError = 2;
constexpr int kAccuracyError = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write '" + path + "'");
  return os;
}

void write_manifest(const std::string& output, const std::string& command, const nlohmann::json& params,
                    const std::vector<std::string>& files, std::uint64_t seed, Clock::time_point t0) {
  auto os = open_out(output + ".manifest.json");
  os << harness::make_manifest(command, params, files, seed, seconds_since(t0)).dump(2) << '\n';
}

struct LevelsArgs {
  double mu{1.0}, h{0.1}, V{1.0}, F{1.0}, tau{0.0}, sqrt_g{1.0};
  int n_max{-1};
};

struct KernelArgs {
  double mu{1.0}, h{0.1}, W{1.0}, v{0.0};
  std::vector<double> x{0.0, 0.0}, y{0.0, 0.0};
  int grid{0};
  double extent{1.0};
  std::string out;
};

struct DiracArgs {
  double mu{2.0}, h{0.1}, W{1.0}, kappa{0.5}, sigma{0.5};
  std::string path{"radial"};
};

struct FlowArgs {
  double mu{10.0}, F{1.0}, V0{1.0};
  std::vector<double> grad{0.0, 0.0}, x0{0.0, 0.0};
  double angle{0.0}, periods{10.0}, tol{1e-11};
  std::string out, events;
};

struct SweepArgs {
  std::string config, out;
  long long seed{-1};
};

struct RegimesArgs {
  double mu{1.0}, h{0.01}, delta{0.0};
  int m{2};
  double kappa{-1.0};
};

int run_levels(const LevelsArgs& a) {
  landau::ModelScalars s;
  s.mu = a.mu;
  s.h = a.h;
  s.V = a.V;
  s.f = a.F;
  s.tau = a.tau;
  s.sqrt_g = a.sqrt_g;
  s.validate();
  const auto n = landau::level_count(s);
  std::cout << "N = " << n << '\n';
  std::cout << "e_MW = " << format_real(landau::magnetic_weyl_density(s)) << '\n';
  std::cout << "e_W = " << format_real(landau::weyl_density_diag(s)) << '\n';
  const int shown = a.n_max >= 0 ? a.n_max : static_cast<int>(n);
  const auto levels = landau::landau_levels(s, shown);
  std::cout << "levels =";
  for (double e : levels) std::cout << ' ' << format_real(e);
  std::cout << '\n';
  return 0;
}

int run_kernel(const KernelArgs& a) {
  const auto t0 = Clock::now();
  kernels::ModelParams p;
  p.mu = a.mu;
  p.h = a.h;
  p.W = a.W;
  p.v = a.v;
  p.n_max = kernels::default_n_max(a.mu, a.h, a.W) + (a.v != 0.0 ? 8 : 1);
  p.validate();
  if (a.grid > 0) {
    if (a.out.empty()) throw InvalidInput("kernel --grid needs --out");
    std::vector<Vec2> axis;
    for (int i = 0; i < a.grid; ++i) {
      const double s = a.grid == 1 ? 0.0 : -a.extent + 2.0 * a.extent * i / (a.grid - 1);
      axis.emplace_back(s, s);
    }
    const auto field = kernels::kernel_grid(p, axis);
    field.check_invariants();
    auto os = open_out(a.out);
    field.write_csv(os);
    write_manifest(a.out, "kernel", {{"params", kernels::to_json(p)}, {"grid", a.grid}, {"extent", format_real(a.extent)}},
                   {a.out}, 0, t0);
    std::cout << "wrote " << a.out << '\n';
    return 0;
  }
  const Vec2 x(a.x.at(0), a.x.at(1)), y(a.y.at(0), a.y.at(1));
  const Complex e = kernels::ModelKernel(p)(x, y);
  nlohmann::json j = {{"params", kernels::to_json(p)},
                      {"re", format_real(e.real())},
                      {"im", format_real(e.imag())},
                      {"abs", format_real(std::abs(e))}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_dirac(const DiracArgs& a) {
  harness::SweepConfig cfg;
  cfg.mu = {a.mu};
  cfg.h = {a.h};
  cfg.W = a.W;
  cfg.kappa = a.kappa;
  cfg.sigma = a.sigma;
  if (a.path == "full") {
    cfg.path = harness::DiracPath::full;
  } else if (a.path != "radial") {
    throw InvalidInput("--path must be radial or full");
  }
  const auto r = harness::sweep_dirac_gap(cfg);
  if (r.table.status.front() != "ok") throw AccuracyError(r.table.status.front());
  nlohmann::json j;
  for (std::size_t i = 0; i < r.table.columns.size(); ++i) j[r.table.columns[i]] = format_real(r.table.rows[0][i]);
  j["path"] = a.path;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_flow(const FlowArgs& a) {
  const auto t0 = Clock::now();
  const auto f = dynamics::ModelField::linear(a.mu, a.F, a.V0, Vec2(a.grad.at(0), a.grad.at(1)));
  const auto s0 = dynamics::energy_shell_state(f, Vec2(a.x0.at(0), a.x0.at(1)), a.angle);
  const auto traj = dynamics::integrate_flow(f, s0, a.periods * 2.0 * kPi / (a.mu * a.F), a.tol);
  const auto events = dynamics::self_intersections(traj);
  const Vec2 drift = dynamics::measured_drift(traj);
  nlohmann::json j = {{"windings", traj.windings()},
                      {"steps", traj.steps.size()},
                      {"max_energy_drift", format_real(traj.max_energy_drift)},
                      {"measured_drift", {format_real(drift.x()), format_real(drift.y())}},
                      {"self_intersections", events.size()}};
  std::vector<std::string> files;
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    traj.write_csv(os);
    files.push_back(a.out);
  }
  if (!a.events.empty()) {
    auto os = open_out(a.events);
    os << dynamics::to_json(events).dump(2) << '\n';
    files.push_back(a.events);
  }
  if (!files.empty()) {
    const nlohmann::json params = {{"mu", format_real(a.mu)},
                                   {"F", format_real(a.F)},
                                   {"V0", format_real(a.V0)},
                                   {"grad", {format_real(a.grad[0]), format_real(a.grad[1])}},
                                   {"x0", {format_real(a.x0[0]), format_real(a.x0[1])}},
                                   {"angle", format_real(a.angle)},
                                   {"periods", format_real(a.periods)},
                                   {"tol", format_real(a.tol)}};
    write_manifest(files.front(), "flow", params, files, 0, t0);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_sweep_cmd(const SweepArgs& a) {
  const auto t0 = Clock::now();
  auto config = harness::Config::load(a.config);
  if (!a.out.empty()) config.set("sweep.output", a.out);
  if (a.seed >= 0) config.set("sweep.seed", std::to_string(a.seed));
  const auto cfg = harness::SweepConfig::from_config(config);
  const std::string out = cfg.output.empty() ? std::string(harness::to_string(cfg.quantity)) + ".csv" : cfg.output;
  const auto r = harness::run_sweep(cfg);
  {
    auto os = open_out(out);
    r.table.write_csv(os);
  }
  const std::string dat = out + ".dat";
  {
    auto os = open_out(dat);
    r.table.write_dat(os);
  }
  auto params = cfg.to_json();
  params["output"] = out;
  write_manifest(out, "sweep", params, {out, dat}, cfg.seed, t0);
  std::cout << r.summary.dump(2) << '\n';
  return r.table.failed() == 0 ? 0 : kAccuracyError;
}

int run_regimes(const RegimesArgs& a) {
  const auto r = a.kappa > 0.0 ? regimes::report(a.mu, a.h, a.m, a.kappa, a.delta) : regimes::thresholds(a.mu, a.h, a.m, a.delta);
  std::cout << regimes::to_json(r).dump(2) << '\n';
  return 0;
}

int run_selftest(const std::string& out) {
  const auto t0 = Clock::now();
  const auto lines = harness::selftest();
  bool ok = true;
  for (const auto& l : lines) ok = ok && l.pass;
  if (!out.empty()) {
    {
      auto os = open_out(out);
      harness::write_checks_csv(os, lines);
    }
    write_manifest(out, "selftest", nlohmann::json::object(), {out}, 0, t0);
  }
  harness::write_checks_csv(std::cout, lines);
  std::cout << (ok ? "selftest: all checks passed" : "selftest: FAILED") << '\n';
  return ok ? 0 : kAccuracyError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic Weyl asymptotics toolkit"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(harness::kVersion));

  LevelsArgs la;
  auto* levels = app.add_subcommand("levels", "Landau levels, filled count and magnetic Weyl density");
  levels->add_option("--mu", la.mu, "coupling")->required();
  levels->add_option("--h", la.h, "semiclassical parameter")->required();
  levels->add_option("--V", la.V, "potential value");
  levels->add_option("--F", la.F, "field intensity");
  levels->add_option("--tau", la.tau, "spectral level");
  levels->add_option("--sqrt-g", la.sqrt_g, "metric volume factor");
  levels->add_option("--n-max", la.n_max, "levels to list (default: filled count)");

  KernelArgs ka;
  auto* kernel = app.add_subcommand("kernel", "Model spectral projector kernel e(x, y, 0)");
  kernel->add_option("--mu", ka.mu)->required();
  kernel->add_option("--h", ka.h)->required();
  kernel->add_option("--W", ka.W);
  kernel->add_option("--v", ka.v);
  kernel->add_option("--x", ka.x)->expected(2);
  kernel->add_option("--y", ka.y)->expected(2);
  kernel->add_option("--grid", ka.grid, "points on the diagonal segment for a full grid");
  kernel->add_option("--extent", ka.extent);
  kernel->add_option("--out", ka.out, "CSV output for --grid");

  DiracArgs da;
  auto* dirac = app.add_subcommand("dirac", "Dirac energy of the model against its Weyl reference");
  dirac->add_option("--mu", da.mu)->required();
  dirac->add_option("--h", da.h)->required();
  dirac->add_option("--W", da.W);
  dirac->add_option("--kappa", da.kappa);
  dirac->add_option("--sigma", da.sigma, "Gaussian cutoff width");
  dirac->add_option("--path", da.path, "radial or full");

  FlowArgs fa;
  auto* flow = app.add_subcommand("flow", "Classical magnetic flow on V = V0 + grad . x");
  flow->add_option("--mu", fa.mu)->required();
  flow->add_option("--F", fa.F);
  flow->add_option("--V0", fa.V0);
  flow->add_option("--grad", fa.grad)->expected(2);
  flow->add_option("--x0", fa.x0)->expected(2);
  flow->add_option("--angle", fa.angle, "initial velocity angle");
  flow->add_option("--periods", fa.periods);
  flow->add_option("--tol", fa.tol);
  flow->add_option("--out", fa.out, "trajectory CSV");
  flow->add_option("--events", fa.events, "self-intersection JSON");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Parameter sweep from a key = value config file");
  sweep->add_option("--config", sa.config)->required();
  sweep->add_option("--out", sa.out, "CSV output (overrides the config)");
  sweep->add_option("--seed", sa.seed, "seed (overrides the config)");

  RegimesArgs ra;
  auto* reg = app.add_subcommand("regimes", "Threshold scales, regime and remainder expressions");
  reg->add_option("--mu", ra.mu)->required();
  reg->add_option("--h", ra.h)->required();
  reg->add_option("--m", ra.m);
  reg->add_option("--delta", ra.delta, "exponent margin in T* (default 0)");
  reg->add_option("--kappa", ra.kappa, "adds the remainder expressions");

  std::string self_out;
  auto* self = app.add_subcommand("selftest", "Fast invariant suite");
  self->add_option("--out", self_out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*levels) return run_levels(la);
    if (*kernel) return run_kernel(ka);
    if (*dirac) return run_dirac(da);
    if (*flow) return run_flow(fa);
    if (*sweep) return run_sweep_cmd(sa);
    if (*reg) return run_regimes(ra);
    if (*self) return run_selftest(self_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kAccuracyError;
  }
  return kConfigError;
}
