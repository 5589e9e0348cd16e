#include <doctest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "magweyl/errors.hpp"
#include "magweyl/kernels.hpp"
#include "magweyl/perturbation.hpp"

using namespace magweyl;
using namespace magweyl::perturbation;

namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("ladder commutator and ground state") {
  const double mu = 2.0, h = 0.1;
  for (int n2 : {1, 3}) {
    auto [Z, Zs] = build_ladder(6, n2, mu, h);
    CHECK(Z.basis == Basis::oscillator_tensor);
    CHECK(max_abs(Zs.entries - Z.entries.adjoint()) == 0.0);
    const Eigen::MatrixXcd c = Zs.entries * Z.entries - Z.entries * Zs.entries;
    const auto inner = 5 * n2;
    const Eigen::MatrixXcd expect = 2.0 * mu * h * Eigen::MatrixXcd::Identity(inner, inner);
    CHECK(max_abs(c.topLeftCorner(inner, inner) - expect) <= 1e-12);
    for (int m = 0; m < n2; ++m) {
      CHECK(Zs.entries.col(m).norm() <= 1e-15);
      for (int n = 1; n < 6; ++n) {
        const double norm2 = Zs.entries.col(n * n2 + m).squaredNorm();
        CHECK(norm2 == doctest::Approx(2.0 * mu * h * n).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(build_ladder(1, 1, 1.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(build_ladder(4, 1, -1.0, 0.1), InvalidInput);
}

TEST_CASE("propagator basics") {
  const auto A = random_hermitian(6, 2.0, 7);
  CHECK(A.hermitian);
  CHECK(op_norm(A.entries) == doctest::Approx(2.0).epsilon(1e-12));
  const double h = 0.2;
  const auto U0 = propagator(A, 0.0, h);
  CHECK(max_abs(U0.entries - Eigen::MatrixXcd::Identity(6, 6)) <= 1e-12);

  const auto U1 = propagator(A, 0.3, h), U2 = propagator(A, 0.5, h), U12 = propagator(A, 0.8, h);
  CHECK(max_abs(U1.entries * U2.entries - U12.entries) <= 1e-12);
  CHECK(max_abs(U1.entries * U1.entries.adjoint() - Eigen::MatrixXcd::Identity(6, 6)) <= 1e-12);

  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
  d.diagonal() << 1.0, -0.5, 2.0;
  const auto Ud = propagator(OperatorMatrix::from(d), 0.4, h);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(Ud.entries(i, i) - std::polar(1.0, 0.4 * d(i, i).real() / h)) <= 1e-14);

  Eigen::MatrixXcd skew = Eigen::MatrixXcd::Zero(2, 2);
  skew(0, 1) = 1.0;
  CHECK_THROWS_AS(propagator(OperatorMatrix::from(skew), 1.0, h), InvalidInput);
}

TEST_CASE("duhamel series exact cases") {
  const double h = 0.1, t = 0.25;
  const auto A = random_hermitian(5, 1.0, 3);
  const auto zero = OperatorMatrix::from(Eigen::MatrixXcd::Zero(5, 5));
  const auto r0 = duhamel_series(A, zero, t, h, 3);
  CHECK(max_abs(r0.approx.entries - propagator(A, t, h).entries) <= 1e-12);

  // B commuting with A0: term k is (i t B / h)^k / k! times U0(t).
  const auto B = OperatorMatrix::from(0.02 * A.entries * A.entries + 0.01 * A.entries);
  const auto r = duhamel_series(A, B, t, h, 4);
  const Eigen::MatrixXcd u0 = propagator(A, t, h).entries;
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(5, 5);
  double fact = 1.0;
  for (int k = 0; k <= 4; ++k) {
    if (k > 0) {
      power = power * (Complex(0.0, t / h) * B.entries);
      fact *= k;
    }
    CHECK(max_abs(r.terms[static_cast<std::size_t>(k)].value - u0 * power / fact) <= 1e-9);
  }
}

TEST_CASE("duhamel remainder obeys the bound") {
  const double h = 0.1, t = 0.2, nu = 0.3;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto A = random_hermitian(8, 1.0, seed);
    const auto B = random_hermitian(8, nu, 100 + seed);
    const Eigen::MatrixXcd U = propagator(OperatorMatrix::from(A.entries + B.entries), t, h).entries;
    double prev = 1e300;
    for (int K = 0; K <= 3; ++K) {
      const auto r = duhamel_series(A, B, t, h, K);
      REQUIRE(r.terms.size() == static_cast<std::size_t>(K + 1));
      const double err = op_norm(U - r.approx.entries);
      CHECK(err <= remainder_check(nu, t, h, K, 0.0).bound * (1.0 + 1e-9));
      CHECK(err < prev);
      prev = err;
      for (const auto& term : r.terms) CHECK(op_norm(term.value) <= term.bound * (1.0 + 1e-9));
      if (K > 0) {
        const auto lower = duhamel_series(A, B, t, h, K - 1);
        CHECK(max_abs(r.approx.entries - lower.approx.entries - r.terms.back().value) <= 1e-9);
      }
    }
  }
  const auto A = random_hermitian(3, 1.0, 1);
  CHECK_THROWS_AS(duhamel_series(A, A, 0.1, 0.1, 5), InvalidInput);
  CHECK_THROWS_AS(duhamel_series(A, random_hermitian(4, 1.0, 2), 0.1, 0.1, 1), InvalidInput);
}

TEST_CASE("remainder check") {
  const auto r = remainder_check(1e-4, 1.0, 1e-2, 2, 0.1);
  CHECK(r.smallness);
  CHECK(r.bound == doctest::Approx(std::pow(1e-2, 3) / 6.0));
  const auto big = remainder_check(1.0, 2.0, 1.0, 1, 0.0);
  CHECK_FALSE(big.smallness);
  CHECK(big.bound == doctest::Approx(2.0));
  CHECK(remainder_check(1.0, 2.0, 1.0, 2, 0.0).bound == doctest::Approx(8.0 / 6.0));
  CHECK_THROWS_AS(remainder_check(1.0, 1.0, 0.0, 1, 0.0), InvalidInput);
}

TEST_CASE("heisenberg evolution of the ladder") {
  const double mu = 2.0, h = 0.1;
  auto [Z, Zs] = build_ladder(8, 2, mu, h);
  const auto A0 = OperatorMatrix::from(0.5 * Zs.entries * Z.entries);
  CHECK(max_abs(heisenberg_evolve(A0, Z, 0.0, h).entries - Z.entries) <= 1e-14);
  const auto I = OperatorMatrix::from(Eigen::MatrixXcd::Identity(16, 16));
  CHECK(max_abs(heisenberg_evolve(A0, I, 0.9, h).entries - I.entries) <= 1e-12);
  for (double t : {0.3, 1.1, -0.7}) {
    const Eigen::MatrixXcd d = heisenberg_evolve(A0, Z, t, h).entries - std::polar(1.0, mu * t) * Z.entries;
    CHECK(max_abs(d.topLeftCorner(14, 14)) <= 1e-9);
  }
}

TEST_CASE("discretized model spectrum") {
  kernels::ModelParams p;
  p.mu = 4.0;
  p.h = 0.25;
  p.W = 1.0;
  p.n_max = 2;
  const double L = 2.0;
  const auto dm = discretize_model(p, L, 48);
  CHECK(dm.blocks.size() == 48u);
  const auto spec = dm.spectrum();
  CHECK(std::abs(spec.front()) <= 5e-3);
  int below = 0;
  for (double e : spec) below += e < 0.5 ? 1 : 0;
  const double degeneracy = (2.0 * L) * (2.0 * L) * p.mu / (2.0 * kPi * p.h);
  CHECK(below <= degeneracy);
  CHECK(below >= 0.85 * degeneracy);

  const auto op = dm.to_operator();
  CHECK(op.dim() == 48 * 48);
  CHECK(op.hermitian);
  CHECK(op.basis == Basis::fourier_grid);
  CHECK_THROWS_AS(std::ignore = dm.to_operator(1024), MemoryGuardError);
  CHECK_THROWS_AS(discretize_model(p, L, 3), InvalidInput);
  CHECK_THROWS_AS(discretize_model(p, -1.0, 16), InvalidInput);
  CHECK_THROWS_AS(discretize_model(p, L, 64, 1024), MemoryGuardError);
}

TEST_CASE("discretized projector matches the model kernel") {
  kernels::ModelParams p;
  p.mu = 4.0;
  p.h = 0.25;
  p.W = 1.5;
  p.n_max = 4;
  const std::vector<Vec2> pts{Vec2(0, 0), Vec2(0.2, -0.1), Vec2(-0.3, 0.25), Vec2(0.1, 0.3)};
  const double scale = std::abs(kernels::model_kernel(p, pts[0], pts[0]));
  double prev = 1e300;
  for (int n : {16, 32, 48}) {
    const auto dm = discretize_model(p, 2.0, n);
    double worst = 0.0;
    for (const auto& x : pts) {
      for (const auto& y : pts) worst = std::max(worst, std::abs(dm.projector_kernel(x, y) - kernels::model_kernel(p, x, y)));
    }
    worst /= scale;
    CHECK(worst <= std::max(prev, 1e-8));
    prev = worst;
  }
  CHECK(prev <= 0.05);
}
