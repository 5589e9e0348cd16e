#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "magweyl/errors.hpp"
#include "magweyl/kernels.hpp"
#include "magweyl/landau.hpp"

using namespace magweyl;
using namespace magweyl::kernels;

namespace {

ModelParams params(double mu, double h, double W, double v = 0.0, int n_max = -1) {
  ModelParams p;
  p.mu = mu;
  p.h = h;
  p.W = W;
  p.v = v;
  p.n_max = n_max >= 0 ? n_max : default_n_max(mu, h, W) + 4;
  return p;
}

double mw_density(double mu, double h, double W) {
  landau::ModelScalars s;
  s.mu = mu;
  s.h = h;
  s.V = W;
  return landau::magnetic_weyl_density(s);
}

// Direct evaluation of the xi_1 integral in its original variables: Hermite
// functions one at a time, uniform composite Gauss-Legendre panels in xi_1 and
// the level condition checked node by node on breakpoint-aligned panels.
Complex oracle_kernel(const ModelParams& p, const Vec2& x, const Vec2& y) {
  const double mu = p.mu, h = p.h, v = p.v;
  const double a = std::sqrt(mu / h);
  const double shift = v / (mu * mu);
  const double m = 0.5 * (x.y() + y.y());
  const int n_top = 40;
  const double reach = (std::sqrt(2.0 * n_top + 1.0) + 9.0) / a;
  const double lo = (m - shift - reach) * mu / h;
  const double hi = (m - shift + reach) * mu / h;
  std::vector<double> cuts{lo, hi};
  if (v != 0.0) {
    for (int n = 0; n <= n_top; ++n) {
      const double xi = ((2.0 * n + 1.0) * mu * h - p.W - v * v / (mu * mu)) * mu / (2.0 * v * h);
      if (xi > lo && xi < hi) cuts.push_back(xi);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  const auto& gl = specfun::cached_rule(specfun::RuleKind::gauss_legendre, 24);
  Complex total{0.0, 0.0};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const int panels = 400;
    const double width = (cuts[k + 1] - cuts[k]) / panels;
    for (int q = 0; q < panels; ++q) {
      const double mid = cuts[k] + (q + 0.5) * width;
      for (std::size_t i = 0; i < gl.size(); ++i) {
        const double xi = mid + 0.5 * width * gl.nodes[i];
        const double budget = p.W + 2.0 * v * h * xi / mu + v * v / (mu * mu);
        double sum = 0.0;
        for (int n = 0; n <= n_top && (2.0 * n + 1.0) * mu * h <= budget; ++n) {
          sum += specfun::hermite_fn(n, a * (-h * xi / mu + x.y() - shift)) *
                 specfun::hermite_fn(n, a * (-h * xi / mu + y.y() - shift));
        }
        total += 0.5 * width * gl.weights[i] * sum * std::polar(1.0, xi * (x.x() - y.x()));
      }
    }
  }
  return total * a / (2.0 * kPi);
}

}  // namespace

TEST_CASE("degenerate model kernel on the diagonal") {
  CHECK(model_kernel(params(1, 1, 1), Vec2(0.3, -0.2), Vec2(0.3, -0.2)).real() ==
        doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-8));
  CHECK(model_kernel(params(1, 1, 1), Vec2(0, 0), Vec2(0, 0)).real() == doctest::Approx(0.159155).epsilon(1e-5));
  for (auto [mu, h] : {std::pair{10.0, 0.02}, std::pair{2.0, 0.1}, std::pair{4.0, 0.01}, std::pair{1.0, 0.05}}) {
    const auto p = params(mu, h, 1.0);
    for (const Vec2 x : {Vec2(0, 0), Vec2(1.5, -2.0), Vec2(-7.0, 3.25)}) {
      const Complex e = model_kernel(p, x, x);
      CHECK(e.real() == doctest::Approx(mw_density(mu, h, 1.0)).epsilon(1e-8));
      CHECK(std::abs(e.imag()) < 1e-12);
    }
  }
}

TEST_CASE("degenerate model kernel at unit distance") {
  const auto p = params(1, 1, 1);
  for (double ang : {0.0, 0.7, 1.9, 3.0}) {
    const Vec2 x(0.2, 0.1);
    const Vec2 y = x + Vec2(std::cos(ang), std::sin(ang));
    CHECK(std::abs(model_kernel(p, x, y)) == doctest::Approx(std::exp(-0.25) / (2 * kPi)).epsilon(1e-8));
  }
  CHECK(std::abs(model_kernel(p, Vec2(0, 0), Vec2(1, 0))) == doctest::Approx(0.12394).epsilon(1e-4));
}

TEST_CASE("landau projector oracle") {
  CHECK(landau_projector_kernel(0, 3, 0.1, Vec2(1, 2), Vec2(1, 2)).real() ==
        doctest::Approx(3 / (2 * kPi * 0.1)).epsilon(1e-15));
  // mu |x-y|^2 / (2h) = 1 is the zero of L_1.
  CHECK(std::abs(landau_projector_kernel(1, 2, 0.5, Vec2(0, 0), Vec2(std::sqrt(0.5), 0.0))) < 1e-15);
  const Complex z = landau_projector_kernel(2, 1, 1, Vec2(0, 0), Vec2(0.6, 0.8));
  const Complex all = model_kernel(params(1, 1, 5.5), Vec2(0, 0), Vec2(0.6, 0.8)) -
                      model_kernel(params(1, 1, 3.5), Vec2(0, 0), Vec2(0.6, 0.8));
  CHECK(std::abs(z - all) < 1e-8 * std::abs(z));
  CHECK_THROWS_AS(landau_projector_kernel(-1, 1, 1, Vec2(0, 0), Vec2(0, 0)), InvalidInput);
}

TEST_CASE("sum of landau projectors equals the model kernel") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto [mu, h, W] : {std::tuple{10.0, 0.02, 1.0}, std::tuple{2.0, 0.1, 1.0}, std::tuple{1.0, 0.05, 1.3}}) {
    const auto p = params(mu, h, W);
    landau::ModelScalars s;
    s.mu = mu;
    s.h = h;
    s.V = W;
    const auto n_levels = landau::level_count(s);
    const double len = 3.0 * std::sqrt(h / mu);
    for (int k = 0; k < 16; ++k) {
      const Vec2 x(u(rng), u(rng));
      const Vec2 y = x + len * Vec2(u(rng), u(rng));
      Complex sum{0.0, 0.0};
      for (int n = 0; n < n_levels; ++n) sum += landau_projector_kernel(n, mu, h, x, y);
      const Complex e = model_kernel(p, x, y);
      CHECK(std::abs(e - sum) <= 1e-8 * std::max(std::abs(sum), 1e-3 * mu / (2 * kPi * h)));
    }
  }
}

TEST_CASE("degenerate kernel is radial and bounded by the diagonal") {
  const auto p = params(10, 0.02, 1);
  const ModelKernel k(p);
  const double diag = k.diagonal(Vec2(0, 0));
  for (double r : {0.01, 0.05, 0.1, 0.2}) {
    double lo = 1e300, hi = 0.0;
    for (int j = 0; j < 12; ++j) {
      const double ang = 0.37 + j * 2 * kPi / 12;
      const Vec2 x(0.4, -0.3);
      const double m = std::abs(k(x, x + r * Vec2(std::cos(ang), std::sin(ang))));
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      CHECK(m <= diag * (1 + 1e-12));
    }
    CHECK(hi - lo <= 1e-9 * std::max(hi, 1e-3 * diag));
  }
}

TEST_CASE("tilted model kernel against the direct oracle") {
  for (double v : {0.3, -0.3, 0.05}) {
    const auto p = params(4, 0.05, 1, v, 30);
    const ModelKernel k(p);
    for (auto [x, y] : {std::pair{Vec2(0, 0), Vec2(0, 0)}, std::pair{Vec2(0.1, 0.2), Vec2(-0.05, 0.1)},
                        std::pair{Vec2(0.0, 0.5), Vec2(0.2, 0.35)}}) {
      const Complex e = k(x, y);
      const Complex o = oracle_kernel(p, x, y);
      CHECK(std::abs(e - o) <= 1e-7 * std::max(std::abs(o), 1e-3 * p.mu / (2 * kPi * p.h)));
    }
  }
}

TEST_CASE("tilted model kernel is hermitian and continuous in v") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const auto p = params(8, 0.05, 1, 0.05, 20);
  const ModelKernel k(p);
  for (int i = 0; i < 10; ++i) {
    const Vec2 x(u(rng), u(rng)), y(u(rng), u(rng));
    const Complex a = k(x, y), b = k(y, x);
    CHECK(std::abs(a - std::conj(b)) <= 1e-10 * std::max(std::abs(a), 1e-300));
    CHECK(std::abs(a) <= std::sqrt(k.diagonal(x) * k.diagonal(y)) * (1 + 1e-9));
  }
  const auto p0 = params(8, 0.05, 1, 0.0, 20);
  const auto pe = params(8, 0.05, 1, 1e-7, 20);
  const Vec2 x(0.05, 0.1), y(-0.02, 0.03);
  CHECK(std::abs(model_kernel(p0, x, y) - model_kernel(pe, x, y)) < 1e-4 * std::abs(model_kernel(p0, x, y)));
}

TEST_CASE("tilted diagonal grows with x2 for positive tilt") {
  const auto p = params(8, 0.05, 1, 0.5, 30);
  const ModelKernel k(p);
  double prev = 0.0;
  for (double x2 : {-0.5, 0.0, 0.5, 1.0}) {
    const double d = k.diagonal(Vec2(0.3, x2));
    CHECK(d >= prev);
    CHECK(k.diagonal(Vec2(-2.0, x2)) == doctest::Approx(d).epsilon(1e-12));
    prev = d;
  }
}

TEST_CASE("model kernel errors") {
  CHECK_THROWS_AS(model_kernel(params(10, 0.02, 1, 0.0, 2), Vec2(0, 0), Vec2(0, 0)), TruncationError);
  CHECK_NOTHROW(model_kernel(params(10, 0.02, 1, 0.0, 3), Vec2(0, 0), Vec2(0, 0)));
  CHECK_THROWS_AS(model_kernel(params(4, 0.05, 1, 0.3, 3), Vec2(0, 0), Vec2(0, 0)), TruncationError);
  KernelOptions crude;
  crude.order = 2;
  crude.panel_scale = 4.0;
  crude.tolerance = 1e-12;
  CHECK_THROWS_AS(ModelKernel(params(10, 0.02, 1), crude)(Vec2(0, 0), Vec2(0.03, 0.02)), AccuracyError);
  CHECK_THROWS_AS(ModelKernel(params(10, 0.2, 1)), InvalidInput);
  CHECK_THROWS_AS(ModelKernel(params(1, 0.5, -1)), InvalidInput);
  CHECK_THROWS_AS(model_kernel(params(1, 0.5, 1), Vec2(NAN, 0), Vec2(0, 0)), InvalidInput);
}

TEST_CASE("weyl kernel") {
  const Mat2 id = Mat2::Identity();
  CHECK(weyl_kernel(1, 0.1, 0, id, Vec2(1, 1), Vec2(1, 1)) == doctest::Approx(7.9577).epsilon(1e-5));
  landau::ModelScalars s;
  s.mu = 1;
  s.h = 0.1;
  s.V = 1.3;
  s.tau = 0.2;
  s.sqrt_g = std::sqrt(2.0 * 3.0 - 0.25);
  Mat2 g;
  g << 2.0, 0.5, 0.5, 3.0;
  CHECK(weyl_kernel(1.3, 0.1, 0.2, g, Vec2(0.2, 0.1), Vec2(0.2, 0.1)) == landau::weyl_density_diag(s));

  const double root = 3.8317059702075125;
  const double h = 0.1;
  CHECK(std::abs(weyl_kernel(1, h, 0, id, Vec2(0, 0), Vec2(root * h, 0))) < 1e-10);

  // Direct 2-D quadrature over the disk |xi| <= 1 in polar coordinates.
  const double hq = 0.25, dist = 0.5;
  const auto& gl = specfun::cached_rule(specfun::RuleKind::gauss_legendre, 80);
  double direct = 0.0;
  for (std::size_t i = 0; i < gl.size(); ++i) {
    const double rho = 0.5 * (gl.nodes[i] + 1.0);
    for (std::size_t j = 0; j < gl.size(); ++j) {
      const double th = kPi * (gl.nodes[j] + 1.0);
      direct += 0.5 * gl.weights[i] * kPi * gl.weights[j] * rho * std::cos(dist * rho * std::cos(th) / hq);
    }
  }
  direct /= std::pow(2 * kPi * hq, 2);
  CHECK(weyl_kernel(1, hq, 0, id, Vec2(0, 0), Vec2(0.3, 0.4)) == doctest::Approx(direct).epsilon(1e-6));

  CHECK(weyl_kernel(-1, 0.1, 0, id, Vec2(0, 0), Vec2(0.1, 0)) == 0.0);
  Mat2 bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(weyl_kernel(1, 0.1, 0, bad, Vec2(0, 0), Vec2(0.1, 0)), InvalidInput);
  bad << 1.0, 0.2, 0.0, 1.0;
  CHECK_THROWS_AS(weyl_kernel(1, 0.1, 0, bad, Vec2(0, 0), Vec2(0.1, 0)), InvalidInput);
}

TEST_CASE("kernel grid") {
  const auto p = params(10, 0.02, 1);
  auto one = kernel_grid(p, {Vec2(0.1, 0.2)});
  CHECK(one.values.rows() == 1);
  CHECK(one.values(0, 0).real() == doctest::Approx(mw_density(10, 0.02, 1)).epsilon(1e-8));

  auto two = kernel_grid(p, {Vec2(0, 0), Vec2(0.03, -0.02)});
  CHECK(std::abs(two.values(0, 1) - std::conj(two.values(1, 0))) < 1e-12);

  std::vector<Vec2> axis;
  for (int i = 0; i < 8; ++i) axis.emplace_back(0.02 * i, -0.01 * i);
  auto f = kernel_grid(p, axis);
  for (int i = 0; i < 8; ++i) CHECK(f.values(i, i).real() == doctest::Approx(f.values(0, 0).real()).epsilon(1e-12));
  CHECK_NOTHROW(f.check_invariants());

  CHECK_THROWS_AS(kernel_grid(p, {}), InvalidInput);
  auto broken = f;
  broken.values(0, 1) += Complex(1.0, 0.0);
  CHECK_THROWS_AS(broken.check_invariants(), SymmetryError);
}

TEST_CASE("field csv and json round trip") {
  const auto p = params(2, 0.1, 1, 0.1, 12);
  auto f = kernel_grid(p, {Vec2(0, 0), Vec2(0.1, 0.2), Vec2(-0.3, 0.05)});
  std::stringstream csv;
  f.write_csv(csv);
  auto back = read_field_csv(csv, p);
  REQUIRE(back.values.rows() == 3);
  CHECK((back.values - f.values).norm() == 0.0);
  CHECK(back.points_x[1] == f.points_x[1]);

  auto j = nlohmann::json::parse(f.to_json().dump());
  auto g = field_from_json(j);
  CHECK((g.values - f.values).norm() == 0.0);
  CHECK(g.params.v == p.v);
  CHECK(g.gauge.convention == PhaseConvention::landau_gauge);
  CHECK(j["gauge"]["phase_convention"] == "landau_gauge");

  std::stringstream bad("x1,x2,y1,y2,re,im\n0,0,0,0,1\n");
  CHECK_THROWS_AS(read_field_csv(bad, p), InvalidInput);
  CHECK_THROWS_AS(field_from_json(nlohmann::json::object()), InvalidInput);
}

TEST_CASE("quadratic functionals do not see the gauge") {
  const auto p = params(4, 0.05, 1, 0.2, 20);
  const ModelKernel k(p);
  const Vec2 x(0.1, -0.2), y(0.15, -0.1);
  CHECK(std::abs(k(x, y)) == doctest::Approx(std::abs(k.stripped(x, y))).epsilon(1e-15));
}

TEST_CASE("local count") {
  const auto p = params(10, 0.02, 1);
  const auto& gl = specfun::cached_rule(specfun::RuleKind::gauss_legendre, 48);
  const double sigma = 0.3;
  auto psi = [&](const Vec2& x) { return std::exp(-x.squaredNorm() / (2 * sigma * sigma)); };
  const double mass = 2 * kPi * sigma * sigma;
  const double J = local_count(p, psi, gl, Box{Vec2(-3, -3), Vec2(3, 3)});
  CHECK(J == doctest::Approx(mw_density(10, 0.02, 1) * mass).epsilon(1e-8));
  CHECK(local_count(p, [](const Vec2&) { return 0.0; }, gl, Box{Vec2(-1, -1), Vec2(1, 1)}) == 0.0);
  const auto& coarse = specfun::cached_rule(specfun::RuleKind::gauss_legendre, 4);
  CHECK_THROWS_AS(local_count(p, psi, coarse, Box{Vec2(-3, -3), Vec2(3, 3)}), AccuracyError);
  const auto& ts = specfun::cached_rule(specfun::RuleKind::tanh_sinh, 32);
  CHECK_THROWS_AS(local_count(p, psi, ts, Box{Vec2(-3, -3), Vec2(3, 3)}), InvalidInput);
}
