#include <doctest.h>

#include <cmath>
#include <numbers>

#include "magweyl/errors.hpp"
#include "magweyl/landau.hpp"

using namespace magweyl;
using landau::ModelScalars;

namespace {

ModelScalars scalars(double mu, double h, double f, double V, double tau = 0.0, double sqrt_g = 1.0) {
  ModelScalars s;
  s.mu = mu;
  s.h = h;
  s.f = f;
  s.V = V;
  s.tau = tau;
  s.sqrt_g = sqrt_g;
  return s;
}

// Counting by brute force over the defining set.
long long count_by_scan(const ModelScalars& s) {
  long long n = 0;
  while ((2.0 * n + 1.0) * s.mu * s.h * s.f <= s.fermi() * (1.0 + 1e-12)) ++n;
  return n;
}

}  // namespace

TEST_CASE("landau levels examples") {
  auto lv = landau::landau_levels(scalars(10, 0.02, 1, 1), 3);
  REQUIRE(lv.size() == 4);
  const double expect[] = {-0.4, -0.2, 0.0, 0.2};
  for (int i = 0; i < 4; ++i) CHECK(lv[i] == doctest::Approx(expect[i]).epsilon(1e-14));
  CHECK(std::abs(lv[2]) < 1e-15);

  auto lv1 = landau::landau_levels(scalars(1, 1, 1, 0), 1);
  CHECK(lv1[0] == 0.5);
  CHECK(lv1[1] == 1.5);
}

TEST_CASE("landau levels are arithmetic with gap mu h f") {
  auto s = scalars(3.7, 0.11, 1.9, 0.3);
  auto lv = landau::landau_levels(s, 40);
  for (std::size_t i = 1; i < lv.size(); ++i) {
    CHECK(lv[i] > lv[i - 1]);
    CHECK(lv[i] - lv[i - 1] == doctest::Approx(s.mu * s.h * s.f).epsilon(1e-12));
  }
}

TEST_CASE("level count examples and boundary") {
  CHECK(landau::level_count(scalars(10, 0.02, 1, 1)) == 3);
  CHECK(landau::level_count(scalars(1, 1, 1, 0.5)) == 0);
  // Exactly at threshold: (2*2+1)*0.2 = 1.
  CHECK(landau::level_count(scalars(2, 0.1, 1, 1)) == 3);
  CHECK(landau::level_count(scalars(1, 1, 1, 1)) == 1);
  CHECK(landau::level_count(scalars(1, 1, 1, 3)) == 2);
  CHECK(landau::level_count(scalars(1, 1, 1, 2.999)) == 1);
  CHECK(landau::level_count(scalars(1, 0.5, 1, -1)) == 0);
}

TEST_CASE("level count matches scan and is monotone") {
  for (double mu : {0.5, 1.0, 3.0, 10.0}) {
    for (double h : {0.01, 0.03, 0.1}) {
      if (mu * h > 1) continue;
      long long prev_tau = -1;
      for (int k = -10; k <= 40; ++k) {
        const double tau = 0.05 * k;
        auto s = scalars(mu, h, 1.3, 0.7, tau);
        const auto n = landau::level_count(s);
        CHECK(n == count_by_scan(s));
        CHECK(n >= prev_tau);
        prev_tau = n;
      }
      long long prev_V = -1;
      for (int k = 0; k <= 30; ++k) {
        const auto n = landau::level_count(scalars(mu, h, 1.0, 0.1 * k));
        CHECK(n >= prev_V);
        prev_V = n;
      }
    }
  }
  long long prev = 1LL << 40;
  for (int k = 1; k <= 50; ++k) {
    const auto n = landau::level_count(scalars(1.0, 0.002 * k, 1.0, 1.0));
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("level count guard and validation") {
  CHECK_THROWS_AS(landau::level_count(scalars(1e-9, 1e-3, 1, 1)), TruncationError);
  CHECK_THROWS_AS(landau::level_count(scalars(0, 0.1, 1, 1)), InvalidInput);
  CHECK_THROWS_AS(landau::level_count(scalars(1, 0, 1, 1)), InvalidInput);
  CHECK_THROWS_AS(landau::level_count(scalars(1, 1.5, 1, 1)), InvalidInput);
  CHECK_THROWS_AS(landau::level_count(scalars(20, 0.1, 1, 1)), InvalidInput);
  CHECK_THROWS_AS(landau::level_count(scalars(1, 0.1, -1, 1)), InvalidInput);
  CHECK_THROWS_AS(landau::level_count(scalars(1, 0.1, 1, NAN)), InvalidInput);
  CHECK_THROWS_AS(landau::landau_levels(scalars(1, 0.1, 1, 1), -1), InvalidInput);
}

TEST_CASE("magnetic weyl density") {
  CHECK(landau::magnetic_weyl_density(scalars(10, 0.02, 1, 1)) ==
        doctest::Approx(3 * 10 / (2 * std::numbers::pi * 0.02)).epsilon(1e-14));
  CHECK(landau::magnetic_weyl_density(scalars(10, 0.02, 1, 1)) == doctest::Approx(238.732).epsilon(1e-5));
  CHECK(landau::magnetic_weyl_density(scalars(1, 1, 1, 0.5)) == 0.0);

  for (double V : {0.3, 1.0, 2.5, 7.0}) {
    auto s = scalars(4, 0.05, 1.2, V, 0.1, 1.7);
    const auto n = landau::level_count(s);
    if (n == 0) continue;
    const double per = landau::magnetic_weyl_density(s) / static_cast<double>(n);
    CHECK(per == doctest::Approx(s.mu * s.f * s.sqrt_g / (2 * std::numbers::pi * s.h)).epsilon(1e-15));
  }
}

TEST_CASE("weyl diagonal density") {
  CHECK(landau::weyl_density_diag(scalars(1, 0.1, 1, 1)) == doctest::Approx(7.9577).epsilon(1e-5));
  CHECK(landau::weyl_density_diag(scalars(1, 0.1, 1, 0)) == 0.0);
  CHECK(landau::weyl_density_diag(scalars(1, 0.1, 1, 1, 0.5, 2)) == doctest::Approx(31.831).epsilon(1e-5));
  CHECK(landau::weyl_density_diag(scalars(1, 0.1, 1, -1)) == 0.0);
}

TEST_CASE("semiclassical bracketing by one landau level") {
  for (int k = 1; k <= 16; ++k) {
    const double mu_h = 1.0 / (10.0 * k);
    for (double h : {0.1, 0.05, 0.01}) {
      const double mu = mu_h / h;
      auto s = scalars(mu, h, 1, 1);
      const double diff = std::abs(landau::magnetic_weyl_density(s) - landau::weyl_density_diag(s));
      CHECK(diff <= mu / (2 * std::numbers::pi * h) * (1 + 1e-12));
    }
  }
}
