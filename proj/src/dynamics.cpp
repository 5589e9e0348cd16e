#include "magweyl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>

#include <Eigen/LU>
#include <Eigen/QR>

#include "magweyl/errors.hpp"

namespace magweyl::dynamics {

namespace {

Vec2 turn_minus(const Vec2& v) { return Vec2(v.y(), -v.x()); }
Vec2 turn_plus(const Vec2& v) { return Vec2(-v.y(), v.x()); }

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Central difference with one Richardson step: (4 D(s/2) - D(s)) / 3.
template <class Fn>
auto richardson(const Fn& fn, const Vec2& x, int axis, double step) {
  Vec2 e = Vec2::Zero();
  e[axis] = 1.0;
  auto d = [&](double s) { return ((fn(x + s * e) - fn(x - s * e)) / (2.0 * s)).eval(); };
  return ((4.0 * d(0.5 * step) - d(step)) / 3.0).eval();
}

template <class Fn>
double richardson_scalar(const Fn& fn, const Vec2& x, int axis, double step) {
  Vec2 e = Vec2::Zero();
  e[axis] = 1.0;
  auto d = [&](double s) { return (fn(x + s * e) - fn(x - s * e)) / (2.0 * s); };
  return (4.0 * d(0.5 * step) - d(step)) / 3.0;
}

constexpr double kFlowStep = 1e-4;
constexpr double kPointStep = 1e-5;

Mat2 vecpot_jacobian(const ModelField& f, const Vec2& x) {
  if (f.vecpot_jacobian) return f.vecpot_jacobian(x);
  Mat2 j;
  j.col(0) = richardson(f.vecpot, x, 0, kFlowStep);
  j.col(1) = richardson(f.vecpot, x, 1, kFlowStep);
  return j;
}

Vec2 potential_gradient(const ModelField& f, const Vec2& x) {
  if (f.potential_gradient) return f.potential_gradient(x);
  return Vec2(richardson_scalar(f.potential, x, 0, kFlowStep), richardson_scalar(f.potential, x, 1, kFlowStep));
}

std::array<Mat2, 2> metric_gradient(const ModelField& f, const Vec2& x) {
  if (f.metric_gradient) return f.metric_gradient(x);
  return {richardson(f.metric, x, 0, kFlowStep), richardson(f.metric, x, 1, kFlowStep)};
}

Vec4 pack(const FlowState& s) { return Vec4(s.x.x(), s.x.y(), s.xi.x(), s.xi.y()); }
FlowState unpack(const Vec4& y, double t) { return {Vec2(y[0], y[1]), Vec2(y[2], y[3]), t}; }

Vec2 velocity(const ModelField& f, const Vec4& y) {
  const Vec2 x(y[0], y[1]);
  const Vec2 p = Vec2(y[2], y[3]) - f.mu * f.vecpot(x);
  return f.metric(x) * p;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

std::size_t step_index(const Trajectory& traj, double t) {
  if (traj.steps.empty()) throw RangeError("trajectory has no steps");
  const bool forward = traj.steps.front().dt > 0.0;
  auto it = std::upper_bound(traj.steps.begin(), traj.steps.end(), t, [forward](double v, const DenseStep& s) {
    return forward ? v < s.t0 : v > s.t0;
  });
  if (it == traj.steps.begin()) return 0;
  return static_cast<std::size_t>(it - traj.steps.begin()) - 1;
}

// Cumulative turning of the velocity at time t, from the state at the step start.
double turning_at(const Trajectory& traj, const std::vector<double>& turning, double t) {
  const auto i = step_index(traj, t);
  const Vec4 y0 = traj.steps[i].value(traj.steps[i].t0);
  const Vec4 y = traj.steps[i].value(t);
  const Vec2 v0 = velocity(traj.field, y0);
  const Vec2 v = velocity(traj.field, y);
  return turning[i] + std::abs(wrap_angle(std::atan2(v.y(), v.x()) - std::atan2(v0.y(), v0.x())));
}

std::vector<double> turning_of(const Trajectory& traj) {
  std::vector<double> out(traj.states.size(), 0.0);
  double prev = 0.0;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const Vec2 v = velocity(traj.field, pack(traj.states[i]));
    const double a = std::atan2(v.y(), v.x());
    if (i > 0) out[i] = out[i - 1] + std::abs(wrap_angle(a - prev));
    prev = a;
  }
  return out;
}

// Rescales the kinetic momentum so that H(s) = H0; the local step error of
// the integrator otherwise accumulates into a linear energy drift.
void project_to_shell(const ModelField& f, FlowState& s, double H0) {
  const Vec2 p = s.xi - f.mu * f.vecpot(s.x);
  const double kinetic = p.dot(f.metric(s.x) * p);
  const double target = f.potential(s.x) + 2.0 * H0;
  if (!(kinetic > 0.0) || !(target > 0.0)) return;
  s.xi = f.mu * f.vecpot(s.x) + std::sqrt(target / kinetic) * p;
}

// Two branches through the same point that stay together on both sides are
// one retraced curve, not a crossing.
bool overlapping(const Trajectory& traj, double t1, double t2, double t_lo, double t_hi) {
  const double period = 2.0 * kPi / (traj.field.mu * std::abs(field_intensity(traj.field, traj.state_at(t1).x)));
  const double d = 0.01 * period;
  for (double sgn : {-1.0, 1.0}) {
    const double a = t1 + sgn * d, b = t2 + sgn * d;
    if (a < t_lo || a > t_hi || b < t_lo || b > t_hi) continue;
    const Vec2 xa = traj.state_at(a).x;
    const double moved = (xa - traj.state_at(t1).x).norm();
    if ((xa - traj.state_at(b).x).norm() > 1e-6 * moved) return false;
  }
  return true;
}

}  // namespace

void ModelField::validate(const Box& domain, double eps, double eps0) const {
  if (!metric || !vecpot || !potential) throw InvalidInput("ModelField: metric, vecpot and potential are required");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("ModelField: mu must be positive");
  const int n = 9;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 x(domain.lo.x() + (domain.hi.x() - domain.lo.x()) * i / (n - 1.0),
                   domain.lo.y() + (domain.hi.y() - domain.lo.y()) * j / (n - 1.0));
      const Mat2 g = metric(x);
      if (!g.allFinite() || std::abs(g(0, 1) - g(1, 0)) > 1e-12 * g.norm() || g(0, 0) <= 0.0 || g.determinant() <= 0.0) {
        throw InvalidInput("ModelField: metric is not symmetric positive definite");
      }
      const double V = potential(x);
      if (!(V >= eps)) throw InvalidInput("ModelField: potential below eps on the domain");
      const double F = field_intensity(*this, x);
      if (!(std::abs(F) >= eps)) throw InvalidInput("ModelField: field intensity below eps on the domain");
      if (eps0 > 0.0) {
        auto ratio = [this](const Vec2& y) { return potential(y) / field_intensity(*this, y); };
        const Vec2 grad(richardson_scalar(ratio, x, 0, 1e-4), richardson_scalar(ratio, x, 1, 1e-4));
        if (!(grad.norm() >= eps0)) throw InvalidInput("ModelField: |grad(V/F)| below eps0 on the domain");
      }
    }
  }
}

ModelField ModelField::linear(double mu, double F, double V0, const Vec2& grad) {
  ModelField f;
  f.mu = mu;
  f.metric = [](const Vec2&) { return Mat2::Identity(); };
  f.vecpot = [F](const Vec2& x) { return Vec2(-0.5 * F * x.y(), 0.5 * F * x.x()); };
  f.potential = [V0, grad](const Vec2& x) { return V0 + grad.dot(x); };
  f.vecpot_jacobian = [F](const Vec2&) {
    Mat2 j;
    j << 0.0, -0.5 * F, 0.5 * F, 0.0;
    return j;
  };
  f.potential_gradient = [grad](const Vec2&) { return grad; };
  f.metric_gradient = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
  return f;
}

Vec4 DenseStep::value(double t) const {
  const double th = (t - t0) / dt;
  const double th1 = 1.0 - th;
  return coeff[0] + th * (coeff[1] + th1 * (coeff[2] + th * (coeff[3] + th1 * coeff[4])));
}

Vec4 DenseStep::derivative(double t) const {
  const double th = (t - t0) / dt;
  const double th1 = 1.0 - th;
  const Vec4 p = coeff[3] + th1 * coeff[4];
  const Vec4 dp = -coeff[4];
  const Vec4 q = coeff[2] + th * p;
  const Vec4 dq = p + th * dp;
  const Vec4 r = coeff[1] + th1 * q;
  const Vec4 dr = -q + th1 * dq;
  return (r + th * dr) / dt;
}

FlowState Trajectory::state_at(double t) const {
  if (steps.empty()) {
    if (!states.empty() && t == states.front().t) return states.front();
    throw RangeError("trajectory: no dense output");
  }
  const double lo = std::min(states.front().t, states.back().t);
  const double hi = std::max(states.front().t, states.back().t);
  const double slack = 1e-12 * std::max(1.0, std::abs(hi - lo));
  if (t < lo - slack || t > hi + slack) throw RangeError("trajectory: time outside the integrated range");
  return unpack(steps[step_index(*this, t)].value(t), t);
}

std::pair<double, double> Trajectory::winding_span(int n) const {
  auto first = std::find(winding_index.begin(), winding_index.end(), n);
  if (n < 0 || first == winding_index.end()) throw RangeError("trajectory: winding " + std::to_string(n) + " not present");
  auto last = std::find_if(first, winding_index.end(), [n](int w) { return w != n; });
  const auto i0 = static_cast<std::size_t>(first - winding_index.begin());
  // The winding ends where the next one starts.
  const auto i1 = static_cast<std::size_t>(last - winding_index.begin()) - (last == winding_index.end() ? 1 : 0);
  return {states[i0].t, states[i1].t};
}

Vec2 Trajectory::drift_direction() const {
  if (guiding_center.size() < 2) return Vec2(1.0, 0.0);
  const Vec2 d = guiding_center.back() - guiding_center.front();
  const double scale = std::max(1.0, guiding_center.front().norm());
  if (d.norm() <= 1e-9 * scale) return Vec2(1.0, 0.0);
  return d.normalized();
}

void Trajectory::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "t,x1,x2,xi1,xi2,H\n";
  for (const auto& s : states) {
    os << s.t << ',' << s.x.x() << ',' << s.x.y() << ',' << s.xi.x() << ',' << s.xi.y() << ',' << hamiltonian(field, s)
       << '\n';
  }
  os.precision(old);
}

double hamiltonian(const ModelField& f, const FlowState& s) {
  const Vec2 p = s.xi - f.mu * f.vecpot(s.x);
  return 0.5 * (p.dot(f.metric(s.x) * p) - f.potential(s.x));
}

Vec4 flow_generator(const ModelField& f, const Vec4& y) {
  const Vec2 x(y[0], y[1]);
  const Vec2 p = Vec2(y[2], y[3]) - f.mu * f.vecpot(x);
  const Mat2 g = f.metric(x);
  const Vec2 gp = g * p;
  const Mat2 jac = vecpot_jacobian(f, x);
  const auto dg = metric_gradient(f, x);
  const Vec2 dv = potential_gradient(f, x);
  Vec2 dxi = f.mu * jac.transpose() * gp + 0.5 * dv;
  for (int m = 0; m < 2; ++m) dxi[m] -= 0.5 * p.dot(dg[static_cast<std::size_t>(m)] * p);
  return Vec4(gp.x(), gp.y(), dxi.x(), dxi.y());
}

FlowState energy_shell_state(const ModelField& f, const Vec2& x, double angle) {
  const double V = f.potential(x);
  if (!(V > 0.0)) throw InvalidInput("energy_shell_state: potential must be positive at x");
  const Mat2 g = f.metric(x);
  const Vec2 e(std::cos(angle), std::sin(angle));
  const Vec2 ge = g.inverse() * e;
  const double s = std::sqrt(V / e.dot(ge));
  FlowState st;
  st.x = x;
  st.xi = f.mu * f.vecpot(x) + s * ge;
  return st;
}

Trajectory integrate_flow(const ModelField& f, const FlowState& s0, double T, const FlowOptions& opt) {
  if (!f.metric || !f.vecpot || !f.potential) throw InvalidInput("integrate_flow: field incomplete");
  if (!(opt.tol > 0.0) || !std::isfinite(T)) throw InvalidInput("integrate_flow: need tol > 0 and finite T");
  const double scale = std::max(1.0, std::abs(f.potential(s0.x)));
  const double H0 = hamiltonian(f, s0);
  if (!(std::abs(H0) <= 100.0 * opt.tol * scale)) throw InvalidInput("integrate_flow: initial state is not on H = 0");
  const double F0 = std::abs(field_intensity(f, s0.x));
  const double period = 2.0 * kPi / (f.mu * std::max(F0, 1e-12));
  const double hmax = opt.max_step > 0.0 ? opt.max_step : period / 16.0;
  const double dir = T >= 0.0 ? 1.0 : -1.0;
  const double t_end = s0.t + T;

  Trajectory traj;
  traj.field = f;
  traj.energy0 = H0;
  traj.states.push_back(s0);
  Vec4 y = pack(s0);
  double t = s0.t;
  double h = std::min(hmax, period / 200.0);
  Vec4 k1 = flow_generator(f, y);
  long long count = 0;
  while (dir * (t_end - t) > 0.0) {
    if (++count > opt.max_steps) throw IntegrationError("integrate_flow: step limit reached");
    bool last = false;
    if (h >= std::abs(t_end - t)) {
      h = std::abs(t_end - t);
      last = true;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) throw IntegrationError("integrate_flow: step size underflow");
    const double s = dir * h;
    const Vec4 k2 = flow_generator(f, y + s * a21 * k1);
    const Vec4 k3 = flow_generator(f, y + s * (a31 * k1 + a32 * k2));
    const Vec4 k4 = flow_generator(f, y + s * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec4 k5 = flow_generator(f, y + s * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec4 k6 = flow_generator(f, y + s * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec4 y1 = y + s * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const Vec4 k7 = flow_generator(f, y1);
    const Vec4 err = s * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double sc = opt.tol * (1.0 + std::max(std::abs(y[i]), std::abs(y1[i])));
      norm += (err[i] / sc) * (err[i] / sc);
    }
    norm = std::sqrt(norm / 4.0);
    if (!std::isfinite(norm)) throw IntegrationError("integrate_flow: non-finite state");
    const double factor = std::clamp(0.9 * std::pow(std::max(norm, 1e-10), -0.2), 0.2, 5.0);
    if (norm > 1.0) {
      h *= std::max(factor, 0.2);
      continue;
    }
    DenseStep step;
    step.t0 = t;
    step.dt = s;
    const Vec4 diff = y1 - y;
    const Vec4 bspl = s * k1 - diff;
    step.coeff = {y, diff, bspl, diff - s * k7 - bspl,
                  s * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7)};
    traj.steps.push_back(step);
    t = last ? t_end : t + s;
    FlowState st = unpack(y1, t);
    if (std::abs(hamiltonian(f, st) - H0) > 100.0 * opt.tol * scale) {
      throw IntegrationError("integrate_flow: energy drift above 100 tol");
    }
    project_to_shell(f, st, H0);
    y = pack(st);
    k1 = y == y1 ? k7 : flow_generator(f, y);
    traj.max_energy_drift = std::max(traj.max_energy_drift, std::abs(hamiltonian(f, st) - H0));
    traj.states.push_back(st);
    h = std::min(h * factor, hmax);
  }

  const auto turning = turning_of(traj);
  traj.guiding_center.reserve(traj.states.size());
  traj.winding_index.reserve(traj.states.size());
  int w = 0;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    traj.guiding_center.push_back(guiding_center(f, traj.states[i]));
    w = std::max(w, static_cast<int>(std::floor(turning[i] / (2.0 * kPi))));
    traj.winding_index.push_back(w);
  }
  return traj;
}

double field_intensity(const ModelField& f, const Vec2& x) {
  const Vec2 d1v = richardson(f.vecpot, x, 0, kPointStep);
  const Vec2 d2v = richardson(f.vecpot, x, 1, kPointStep);
  return std::sqrt(f.metric(x).determinant()) * (d1v.y() - d2v.x());
}

Vec2 drift_velocity(const ModelField& f, const Vec2& x) {
  auto ratio = [&f](const Vec2& y) { return f.potential(y) / field_intensity(f, y); };
  const double g1 = richardson_scalar(ratio, x, 0, kPointStep);
  const double g2 = richardson_scalar(ratio, x, 1, kPointStep);
  return Vec2(-g2, g1) / f.mu;
}

Vec2 predicted_drift(const ModelField& f, const Vec2& x) { return -0.5 * drift_velocity(f, x); }

Vec2 guiding_center(const ModelField& f, const FlowState& s) {
  const Vec2 v = velocity(f, pack(s));
  return s.x + turn_minus(v) / (f.mu * field_intensity(f, s.x));
}

Vec2 measured_drift(const Trajectory& traj) {
  const auto n = traj.states.size();
  if (n < 2) throw InsufficientData("measured_drift: need at least two states");
  double st = 0.0, stt = 0.0;
  Vec2 sx = Vec2::Zero(), stx = Vec2::Zero();
  const double t0 = traj.states.front().t;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = traj.states[i].t - t0;
    st += t;
    stt += t * t;
    sx += traj.guiding_center[i];
    stx += t * traj.guiding_center[i];
  }
  const double dn = static_cast<double>(n);
  const double den = dn * stt - st * st;
  if (!(den > 0.0)) throw InsufficientData("measured_drift: degenerate time samples");
  return (dn * stx - st * sx) / den;
}

nlohmann::json to_json(const IntersectionEvent& e) {
  return {{"t_early", e.t_early},
          {"t_late", e.t_late},
          {"point", {e.point.x(), e.point.y()}},
          {"winding_pair", {e.winding_pair.first, e.winding_pair.second}},
          {"phi", e.phi},
          {"front", e.front},
          {"degenerate", e.degenerate}};
}

nlohmann::json to_json(const std::vector<IntersectionEvent>& events) {
  auto arr = nlohmann::json::array();
  for (const auto& e : events) arr.push_back(to_json(e));
  return arr;
}

std::vector<IntersectionEvent> self_intersections(const Trajectory& traj, int subdivisions) {
  if (subdivisions < 1) throw InvalidInput("self_intersections: subdivisions must be positive");
  std::vector<IntersectionEvent> out;
  if (traj.steps.empty()) return out;
  const auto turning = turning_of(traj);

  std::vector<Vec2> pts;
  std::vector<double> times;
  for (const auto& st : traj.steps) {
    for (int j = 0; j < subdivisions; ++j) {
      const double t = st.t0 + st.dt * j / subdivisions;
      const Vec4 y = st.value(t);
      pts.emplace_back(y[0], y[1]);
      times.push_back(t);
    }
  }
  pts.push_back(traj.states.back().x);
  times.push_back(traj.states.back().t);
  const std::size_t chords = pts.size() - 1;

  double cell = 0.0;
  for (std::size_t k = 0; k < chords; ++k) cell = std::max(cell, (pts[k + 1] - pts[k]).norm());
  if (!(cell > 0.0)) return out;
  auto key = [](std::int64_t i, std::int64_t j) { return (i << 32) ^ (j & 0xffffffffLL); };
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> grid;
  grid.reserve(chords * 2);
  for (std::size_t k = 0; k < chords; ++k) {
    const Vec2 lo = pts[k].cwiseMin(pts[k + 1]);
    const Vec2 hi = pts[k].cwiseMax(pts[k + 1]);
    for (auto i = static_cast<std::int64_t>(std::floor(lo.x() / cell)); i <= static_cast<std::int64_t>(std::floor(hi.x() / cell)); ++i) {
      for (auto j = static_cast<std::int64_t>(std::floor(lo.y() / cell)); j <= static_cast<std::int64_t>(std::floor(hi.y() / cell)); ++j) {
        grid[key(i, j)].push_back(static_cast<std::uint32_t>(k));
      }
    }
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (const auto& [_, list] : grid) {
    for (std::size_t a = 0; a < list.size(); ++a) {
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        auto p = std::minmax(list[a], list[b]);
        if (p.second > p.first + 1) pairs.emplace_back(p.first, p.second);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  const Vec2 drift = traj.drift_direction();
  const Vec2 pole = turn_plus(drift);
  const double t_lo = std::min(traj.states.front().t, traj.states.back().t);
  const double t_hi = std::max(traj.states.front().t, traj.states.back().t);
  for (const auto& [a, b] : pairs) {
    const Vec2 p = pts[a], r = pts[a + 1] - pts[a];
    const Vec2 q = pts[b], s = pts[b + 1] - pts[b];
    const double den = cross(r, s);
    if (den == 0.0) continue;
    const double u = cross(q - p, s) / den;
    const double v = cross(q - p, r) / den;
    if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) continue;
    double t1 = times[a] + u * (times[a + 1] - times[a]);
    double t2 = times[b] + v * (times[b + 1] - times[b]);
    const double span1 = std::abs(times[a + 1] - times[a]);
    const double span2 = std::abs(times[b + 1] - times[b]);
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      const auto& s1 = traj.steps[step_index(traj, t1)];
      const auto& s2 = traj.steps[step_index(traj, t2)];
      const Vec4 y1 = s1.value(t1), y2 = s2.value(t2);
      const Vec4 dy1 = s1.derivative(t1), dy2 = s2.derivative(t2);
      const Vec2 res(y1[0] - y2[0], y1[1] - y2[1]);
      Mat2 jac;
      jac << dy1[0], -dy2[0], dy1[1], -dy2[1];
      const double det = jac.determinant();
      if (det == 0.0) break;
      const Vec2 delta = jac.inverse() * res;
      t1 -= delta.x();
      t2 -= delta.y();
      if (t1 < t_lo || t1 > t_hi || t2 < t_lo || t2 > t_hi) break;
      if (std::abs(delta.x()) <= 1e-14 * std::max(1.0, std::abs(t1)) &&
          std::abs(delta.y()) <= 1e-14 * std::max(1.0, std::abs(t2))) {
        ok = true;
        break;
      }
      if (it == 39 && res.norm() < 1e-12) ok = true;
    }
    if (!ok) continue;
    if (std::abs(t1 - times[a]) > 2.0 * span1 + 1e-15 || std::abs(t2 - times[b]) > 2.0 * span2 + 1e-15) continue;
    if (t1 > t2) std::swap(t1, t2);
    if (t2 - t1 < 1e-12 * std::max(1.0, std::abs(t2))) continue;
    IntersectionEvent e;
    e.t_early = t1;
    e.t_late = t2;
    const FlowState early = traj.state_at(t1);
    e.point = early.x;
    const Vec2 va = velocity(traj.field, pack(early));
    const Vec2 vb = velocity(traj.field, pack(traj.state_at(t2)));
    e.degenerate = std::abs(cross(va, vb)) < 1e-6 * va.norm() * vb.norm();
    if (e.degenerate && overlapping(traj, t1, t2, t_lo, t_hi)) continue;
    e.winding_pair = {static_cast<int>(std::floor(turning_at(traj, turning, t1) / (2.0 * kPi))),
                      static_cast<int>(std::floor(turning_at(traj, turning, t2) / (2.0 * kPi)))};
    const Vec2 u_dir = (e.point - guiding_center(traj.field, early)).normalized();
    e.phi = std::acos(std::clamp(u_dir.dot(pole), -1.0, 1.0));
    e.front = u_dir.dot(drift) >= 0.0;
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.t_early != y.t_early ? x.t_early < y.t_early : x.t_late < y.t_late;
  });
  std::vector<IntersectionEvent> unique;
  for (const auto& e : out) {
    bool dup = false;
    for (auto it = unique.rbegin(); it != unique.rend() && e.t_early - it->t_early < 1e-9; ++it) {
      if (std::abs(e.t_late - it->t_late) < 1e-9) {
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(e);
  }
  return unique;
}

int intersections_on_winding(const std::vector<IntersectionEvent>& events, int winding) {
  int n = 0;
  for (const auto& e : events) {
    if (e.winding_pair.first == winding) ++n;
    if (e.winding_pair.second == winding) ++n;
  }
  return n;
}

double winding_distance(const Trajectory& traj, double phi, int n) {
  if (n < 0) throw RangeError("winding_distance: negative winding");
  if (!(phi >= 0.0 && phi <= kPi)) throw InvalidInput("winding_distance: phi must lie in [0, pi]");
  const auto [a0, b0] = traj.winding_span(0);
  const auto [an, bn] = traj.winding_span(n);
  const Vec2 drift = traj.drift_direction();
  const Vec2 target = std::cos(phi) * turn_plus(drift) + std::sin(phi) * drift;
  auto offset = [&](double t) {
    const FlowState s = traj.state_at(t);
    return (s.x - guiding_center(traj.field, s)).eval();
  };
  const int samples = 2048;
  double found = std::numeric_limits<double>::quiet_NaN();
  double prev_t = a0;
  double prev_g = cross(target, offset(a0));
  for (int k = 1; k <= samples && std::isnan(found); ++k) {
    const double t = a0 + (b0 - a0) * k / samples;
    const Vec2 o = offset(t);
    const double g = cross(target, o);
    if ((prev_g <= 0.0) != (g <= 0.0) && o.dot(target) > 0.0) {
      double lo = prev_t, hi = t, glo = prev_g;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = cross(target, offset(mid));
        if ((gm <= 0.0) == (glo <= 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      found = 0.5 * (lo + hi);
    }
    prev_t = t;
    prev_g = g;
  }
  if (std::isnan(found)) throw RangeError("winding_distance: angle not reached on winding 0");
  const Vec2 point = traj.state_at(found).x;
  if (n == 0) return 0.0;
  auto dist = [&](double t) { return (traj.state_at(t).x - point).norm(); };
  int best = 0;
  double best_d = INFINITY;
  for (int k = 0; k <= samples; ++k) {
    const double d = dist(an + (bn - an) * k / samples);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  double lo = an + (bn - an) * std::max(0, best - 1) / samples;
  double hi = an + (bn - an) * std::min(samples, best + 1) / samples;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = dist(c), fd = dist(d);
  for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = dist(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = dist(d);
    }
  }
  return std::min({best_d, fc, fd});
}

std::vector<Tick> tick_structure(const Trajectory& traj, const std::vector<IntersectionEvent>& events) {
  std::vector<Tick> ticks;
  for (const auto& e : events) {
    if (e.winding_pair.first != 0 || e.winding_pair.second < 1 || !e.front || e.phi > 0.5 * kPi || e.degenerate) continue;
    const int n = e.winding_pair.second;
    auto it = std::find_if(ticks.begin(), ticks.end(), [n](const Tick& t) { return t.n == n; });
    if (it == ticks.end()) ticks.push_back({n, e.phi, 0.0});
  }
  (void)traj;
  std::sort(ticks.begin(), ticks.end(), [](const Tick& a, const Tick& b) { return a.n < b.n; });
  if (ticks.size() < 4) throw InsufficientData("tick_structure: fewer than four crossings of winding 0");
  for (std::size_t i = 0; i < ticks.size(); ++i) {
    ticks[i].ell = i + 1 < ticks.size() && ticks[i + 1].n == ticks[i].n + 1 ? std::abs(ticks[i].phi - ticks[i + 1].phi)
                                                                             : std::numeric_limits<double>::quiet_NaN();
  }
  return ticks;
}

std::vector<Tick> tick_structure(const Trajectory& traj) { return tick_structure(traj, self_intersections(traj)); }

TickFit fit_tick_law(const std::vector<Tick>& ticks, double mu) {
  TickFit fit;
  if (ticks.empty()) throw InsufficientData("fit_tick_law: no ticks");
  fit.n_last = ticks.back().n;
  std::vector<const Tick*> upper;
  for (const auto& t : ticks) {
    if (2 * t.n >= fit.n_last) upper.push_back(&t);
  }
  if (upper.size() < 4) throw InsufficientData("fit_tick_law: fewer than four ticks in the upper half");
  auto linear_fit = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    const double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double b = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return std::pair<double, double>{(sy - b * sx) / m, b};
  };
  // (pi/2 - phi)^2 vanishes linearly at the continuous index n_bar; a
  // quadratic in n absorbs the curvature away from it.
  Eigen::MatrixXd design(static_cast<Eigen::Index>(upper.size()), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(upper.size()));
  for (std::size_t i = 0; i < upper.size(); ++i) {
    const double n = upper[i]->n;
    const double g = 0.5 * kPi - upper[i]->phi;
    design.row(static_cast<Eigen::Index>(i)) << 1.0, n, n * n;
    rhs[static_cast<Eigen::Index>(i)] = g * g;
  }
  const Eigen::Vector3d c = design.colPivHouseholderQr().solve(rhs);
  double root = std::numeric_limits<double>::quiet_NaN();
  if (std::abs(c[2]) > 0.0) {
    const double disc = c[1] * c[1] - 4.0 * c[2] * c[0];
    if (disc >= 0.0) {
      for (double sgn : {-1.0, 1.0}) {
        const double r = (-c[1] + sgn * std::sqrt(disc)) / (2.0 * c[2]);
        if (r > fit.n_last && (std::isnan(root) || r < root)) root = r;
      }
    }
  } else if (c[1] < 0.0) {
    root = -c[0] / c[1];
  }
  if (!(root > fit.n_last) || !(root < fit.n_last + 2.0)) {
    throw InsufficientData("fit_tick_law: no last-crossing index beyond the final tick");
  }
  fit.n_bar = root;
  std::vector<double> lx, ly;
  for (const auto* t : upper) {
    lx.push_back(std::log(fit.n_bar - t->n));
    ly.push_back(std::log(0.5 * kPi - t->phi));
  }
  fit.slope = linear_fit(lx, ly).second;
  fit.last_gap = 0.5 * kPi - ticks.back().phi;
  fit.last_gap_scaled = fit.last_gap * std::sqrt(mu);
  return fit;
}

}  // namespace magweyl::dynamics
