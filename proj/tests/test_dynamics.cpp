#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <tuple>

#include "magweyl/dynamics.hpp"
#include "magweyl/errors.hpp"

using namespace magweyl;
using namespace magweyl::dynamics;

namespace {

ModelField euclidean(double mu, std::function<Vec2(const Vec2&)> vecpot, std::function<double(const Vec2&)> V) {
  ModelField f;
  f.mu = mu;
  f.metric = [](const Vec2&) { return Mat2::Identity(); };
  f.vecpot = std::move(vecpot);
  f.potential = std::move(V);
  return f;
}

struct Spiral {
  Trajectory traj;
  std::vector<IntersectionEvent> events;
};

// V = 1 + a x2, F = 1, enough windings for winding 0 to cross every neighbour.
Spiral spiral(double mu, double a = 0.2) {
  const auto f = ModelField::linear(mu, 1.0, 1.0, Vec2(0.0, a));
  const double nbar = 2.0 * mu / (kPi * a);
  Spiral s;
  s.traj = integrate_flow(f, energy_shell_state(f, Vec2(0, 0), 0.0), (2.0 * nbar + 4.0) * 2.0 * kPi / mu);
  s.events = self_intersections(s.traj);
  return s;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("hamiltonian on simple states") {
  auto f = euclidean(1.0, [](const Vec2&) { return Vec2(0, 0); }, [](const Vec2&) { return 1.0; });
  CHECK(hamiltonian(f, {Vec2(0.3, 0.2), Vec2(1, 0), 0}) == doctest::Approx(0.0).epsilon(1e-15));
  auto g = euclidean(1.0, [](const Vec2& x) { return Vec2(-0.5 * x.y(), 0.5 * x.x()); }, [](const Vec2&) { return 0.0; });
  CHECK(hamiltonian(g, {Vec2(0, 0), Vec2(0, 0), 0}) == 0.0);
}

TEST_CASE("flow generator is the symplectic gradient of H") {
  ModelField f;
  f.mu = 3.0;
  f.metric = [](const Vec2& x) {
    Mat2 g;
    g << 1.0 + 0.1 * x.x() * x.x(), 0.05 * x.y(), 0.05 * x.y(), 1.2;
    return g;
  };
  f.vecpot = [](const Vec2& x) { return Vec2(-0.5 * x.y() - 0.1 * x.y() * x.y(), 0.5 * x.x() + 0.2 * std::sin(x.x())); };
  f.potential = [](const Vec2& x) { return 1.0 + 0.3 * x.x() - 0.2 * x.y() * x.y(); };
  const Vec4 y(0.3, -0.4, 0.7, 1.1);
  const Vec4 v = flow_generator(f, y);
  auto H = [&](const Vec4& z) { return hamiltonian(f, {Vec2(z[0], z[1]), Vec2(z[2], z[3]), 0.0}); };
  const double step = 1e-5;
  for (int i = 0; i < 4; ++i) {
    Vec4 e = Vec4::Zero();
    e[i] = step;
    const double d = (H(y + e) - H(y - e)) / (2.0 * step);
    // dx/dt = dH/dxi, dxi/dt = -dH/dx
    const double expected = i < 2 ? -v[i + 2] : v[i - 2];
    CHECK(d == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("constant field: exact cyclotron circle") {
  const double mu = 10.0;
  const auto f = ModelField::linear(mu, 1.0, 1.0);
  const auto s0 = energy_shell_state(f, Vec2(0.2, -0.1), 0.7);
  const double period = 2.0 * kPi / mu;
  const auto one = integrate_flow(f, s0, period);
  CHECK((one.states.back().x - s0.x).norm() <= 1e-8);
  const Vec2 c = guiding_center(f, s0);
  for (const auto& s : one.states) CHECK((s.x - c).norm() == doctest::Approx(0.1).epsilon(1e-9));
  const auto ten = integrate_flow(f, s0, 10.0 * period);
  double drift = 0.0;
  for (const auto& s : ten.states) drift = std::max(drift, std::abs(hamiltonian(f, s) - ten.energy0));
  CHECK(drift <= 1e-9);
  CHECK(ten.windings() == 11);
  CHECK(self_intersections(ten).empty());
  CHECK_THROWS_AS(tick_structure(ten), InsufficientData);
  for (int n : {1, 3, 9}) CHECK(winding_distance(ten, kPi / 3, n) <= 1e-9);
}

TEST_CASE("doubling mu halves radius and period") {
  for (double mu : {5.0, 10.0}) {
    const auto f = ModelField::linear(mu, 1.0, 1.0);
    const auto s0 = energy_shell_state(f, Vec2(0, 0), 0.0);
    const double period = 2.0 * kPi / mu;
    const auto traj = integrate_flow(f, s0, period);
    CHECK((traj.state_at(period).x - s0.x).norm() <= 1e-6 / mu);
    CHECK((traj.state_at(0.5 * period).x - s0.x).norm() == doctest::Approx(2.0 / mu).epsilon(1e-6));
  }
}

TEST_CASE("reversibility and gauge covariance") {
  const double mu = 6.0;
  auto f = euclidean(
      mu, [](const Vec2& x) { return Vec2(-0.5 * x.y(), 0.5 * x.x() + 0.1 * x.x() * x.x()); },
      [](const Vec2& x) { return 1.0 + 0.2 * x.y() + 0.1 * x.x() * x.x(); });
  const auto s0 = energy_shell_state(f, Vec2(0.1, 0.2), 1.0);
  const double T = 3.0 * 2.0 * kPi / mu;
  const auto fwd = integrate_flow(f, s0, T);
  const auto back = integrate_flow(f, fwd.states.back(), -T);
  CHECK((back.states.back().x - s0.x).norm() <= 1e-7);
  CHECK((back.states.back().xi - s0.xi).norm() <= 1e-7);

  auto chi_grad = [](const Vec2& x) { return Vec2(std::cos(x.x()) * x.y(), std::sin(x.x()) + 2.0 * x.y()); };
  auto g = f;
  g.vecpot = [f, chi_grad](const Vec2& x) { return (f.vecpot(x) + chi_grad(x)).eval(); };
  FlowState s1 = s0;
  s1.xi += mu * chi_grad(s0.x);
  const auto moved = integrate_flow(g, s1, T);
  for (double t : {0.3 * T, 0.7 * T, T}) CHECK((moved.state_at(t).x - fwd.state_at(t).x).norm() <= 1e-8);
}

TEST_CASE("field intensity by differences") {
  auto sym = euclidean(1.0, [](const Vec2& x) { return Vec2(-0.5 * x.y(), 0.5 * x.x()); }, [](const Vec2&) { return 1.0; });
  auto landau = euclidean(1.0, [](const Vec2& x) { return Vec2(0.0, x.x()); }, [](const Vec2&) { return 1.0; });
  auto quad = euclidean(1.0, [](const Vec2& x) { return Vec2(0.0, 0.5 * x.x() * x.x()); }, [](const Vec2&) { return 1.0; });
  for (const Vec2 x : {Vec2(0.0, 0.0), Vec2(1.3, -0.4), Vec2(-2.0, 5.0)}) {
    CHECK(field_intensity(sym, x) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(field_intensity(landau, x) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(field_intensity(quad, x) - x.x()) <= 1e-8);
  }
}

TEST_CASE("drift velocity formula and the measured guiding-center drift") {
  const auto f = ModelField::linear(10.0, 1.0, 1.0, Vec2(0.0, 0.1));
  const Vec2 d = drift_velocity(f, Vec2(0.3, 0.2));
  CHECK(d.x() == doctest::Approx(-0.01).epsilon(1e-9));
  CHECK(std::abs(d.y()) <= 1e-12);
  CHECK(drift_velocity(ModelField::linear(10.0, 1.0, 2.0), Vec2(1, 1)).norm() <= 1e-7);

  for (double mu : {20.0, 40.0}) {
    const auto g = ModelField::linear(mu, 1.0, 1.0, Vec2(0.0, 0.1));
    const auto traj = integrate_flow(g, energy_shell_state(g, Vec2(0, 0), 0.0), 20.0 * 2.0 * kPi / mu);
    const Vec2 measured = measured_drift(traj);
    const Vec2 predicted = predicted_drift(g, Vec2(0, 0));
    CHECK((measured - predicted).norm() <= 0.02 * predicted.norm());
    // The guiding centre moves at half the formula speed, in the opposite direction.
    CHECK(measured.dot(drift_velocity(g, Vec2(0, 0))) < 0.0);
  }
}

TEST_CASE("spiral: windings and self-intersection counts") {
  const double mu = 20.0;
  const auto f = ModelField::linear(mu, 1.0, 1.0, Vec2(0.0, 0.1));
  const auto traj = integrate_flow(f, energy_shell_state(f, Vec2(0, 0), 0.0), 5.0 * 2.0 * kPi / mu + 1e-3);
  CHECK(traj.windings() == 6);
  const auto [a, b] = traj.winding_span(2);
  CHECK(b - a == doctest::Approx(2.0 * kPi / mu).epsilon(0.01));
  CHECK_THROWS_AS(std::ignore = traj.winding_span(7), RangeError);

  std::vector<double> mus, counts;
  for (double m : {16.0, 32.0, 64.0}) {
    const auto s = spiral(m);
    const int mid = s.traj.windings() / 2;
    const int count = intersections_on_winding(s.events, mid);
    CHECK(count > m);
    mus.push_back(m);
    counts.push_back(count);
    for (const auto& e : s.events) {
      CHECK(e.t_early < e.t_late);
      CHECK((s.traj.state_at(e.t_late).x - e.point).norm() <= 1e-9);
    }
  }
  CHECK(std::abs(loglog_slope(mus, counts) - 1.0) <= 0.15);
}

TEST_CASE("winding distance grows linearly in n and like mu^-2") {
  std::vector<double> scaled;
  for (double mu : {16.0, 32.0, 64.0}) {
    const auto s = spiral(mu);
    for (double phi : {kPi / 8, kPi / 4, 3 * kPi / 8}) {
      scaled.push_back(winding_distance(s.traj, phi, 1) * mu * mu / std::sin(phi));
      scaled.push_back(winding_distance(s.traj, phi, 3) * mu * mu / (3.0 * std::sin(phi)));
    }
    if (mu == 32.0) {
      const double r1 = winding_distance(s.traj, kPi / 4, 1);
      const double r2 = winding_distance(s.traj, kPi / 4, 2);
      CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(0.25));
    }
    CHECK_THROWS_AS(winding_distance(s.traj, kPi / 4, -1), RangeError);
    CHECK_THROWS_AS(winding_distance(s.traj, kPi / 4, s.traj.windings() + 3), RangeError);
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  CHECK(*hi / *lo <= 4.0);
}

TEST_CASE("tick structure follows the square-root law") {
  std::vector<double> gaps;
  for (double mu : {16.0, 64.0}) {
    const auto s = spiral(mu);
    const auto ticks = tick_structure(s.traj, s.events);
    REQUIRE(ticks.size() >= 4);
    for (std::size_t i = 1; i < ticks.size(); ++i) CHECK(ticks[i].phi > ticks[i - 1].phi);
    const auto fit = fit_tick_law(ticks, mu);
    CHECK(std::abs(fit.slope - 0.5) <= 0.1);
    CHECK(fit.n_bar > fit.n_last);
    // pi/2 - phi at the last crossing is at most sqrt(2 pi a / mu).
    CHECK(fit.last_gap_scaled <= std::sqrt(2.0 * kPi * 0.2) * 1.05);
  }
}

TEST_CASE("validation and export") {
  auto f = ModelField::linear(4.0, 1.0, 1.0, Vec2(0.0, 0.5));
  CHECK_NOTHROW(f.validate(Box{Vec2(-1, -1), Vec2(1, 1)}, 1e-3, 0.1));
  CHECK_THROWS_AS(f.validate(Box{Vec2(-1, -3), Vec2(1, 1)}, 1e-3), InvalidInput);
  CHECK_THROWS_AS(ModelField::linear(4.0, 1.0, 1.0).validate(Box{Vec2(-1, -1), Vec2(1, 1)}, 1e-3, 0.1), InvalidInput);
  FlowState off = energy_shell_state(f, Vec2(0, 0), 0.0);
  off.xi *= 1.5;
  CHECK_THROWS_AS(integrate_flow(f, off, 1.0), InvalidInput);

  const auto traj = integrate_flow(f, energy_shell_state(f, Vec2(0, 0), 0.0), 0.5);
  std::ostringstream os;
  traj.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("t,x1,x2,xi1,xi2,H\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == traj.states.size() + 1);

  IntersectionEvent e;
  e.t_early = 0.25;
  e.t_late = 1.5;
  e.point = Vec2(0.1, -0.2);
  e.winding_pair = {0, 3};
  e.phi = 1.2;
  const auto j = to_json(std::vector<IntersectionEvent>{e});
  CHECK(j[0]["winding_pair"][1] == 3);
  CHECK(j[0]["t_late"].get<double>() == 1.5);
  CHECK(j[0]["degenerate"] == false);
}
