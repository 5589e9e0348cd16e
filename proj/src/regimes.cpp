#include "magweyl/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "magweyl/errors.hpp"
#include "magweyl/format.hpp"

namespace magweyl::regimes {

namespace {

void check_scalars(double mu, double h) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("regimes: mu must be positive and finite");
  if (!(h > 0.0) || !(h < 1.0)) throw InvalidInput("regimes: h must lie in (0, 1)");
}

}  // namespace

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::weak: return "weak";
    case Regime::intermediate: return "intermediate";
    case Regime::strong: return "strong";
  }
  return "?";
}

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::b281: return "b281";
    case Branch::b267: return "b267";
    case Branch::none: return "none";
  }
  return "?";
}

nlohmann::json to_json(const RegimeReport& r) {
  nlohmann::json j = {{"mu", format_real(r.mu)},
          {"h", format_real(r.h)},
          {"m", r.m},
          {"delta", format_real(r.delta)},
          {"kappa", format_real(r.kappa)},
          {"T_star", format_real(r.T_star)},
          {"T2_star", format_real(r.T2_star)},
          {"T3_star", format_real(r.T3_star)},
          {"T4_star", format_real(r.T4_star)},
          {"rho_bar", format_real(r.rho_bar)},
          {"regime", std::string(to_string(r.regime))}};
  if (r.kappa > 0.0) {
    j["bound_2_81"] = format_real(r.bound_2_81);
    j["bound_2_67"] = format_real(r.bound_2_67);
    j["bound_2_48"] = format_real(r.bound_2_48);
    j["applicable"] = std::string(to_string(r.applicable));
  }
  return j;
}

double h_log(double h) { return h * std::abs(std::log(h)); }
double weak_boundary(double h) { return std::pow(h_log(h), -0.25); }
double strong_boundary(double h) { return std::pow(h_log(h), -0.4); }

Regime regime_classify(double mu, double h) {
  check_scalars(mu, h);
  if (mu <= weak_boundary(h)) return Regime::weak;
  if (mu <= strong_boundary(h)) return Regime::intermediate;
  return Regime::strong;
}

RegimeReport thresholds(double mu, double h, int m, double delta) {
  check_scalars(mu, h);
  if (m != 2 && m != 3) throw InvalidInput("regimes: m must be 2 or 3");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidInput("regimes: delta must be nonnegative");
  const double mhl = mu * h_log(h);
  RegimeReport r;
  r.mu = mu;
  r.h = h;
  r.m = m;
  r.delta = delta;
  r.T_star = std::min(std::pow(mu, m) * std::pow(h, 1.0 + delta), 1.0);
  r.T2_star = std::cbrt(mhl);
  r.T3_star = mu >= strong_boundary(h) ? std::pow(mhl, 2.0 / 3.0) : 1.0 / mu;
  r.T4_star = mu * mu * mhl;
  r.rho_bar = std::sqrt(mhl);
  r.regime = regime_classify(mu, h);
  return r;
}

RemainderEstimate remainder_estimate(double mu, double h, double kappa) {
  check_scalars(mu, h);
  if (!(kappa > 0.0) || !(kappa < 2.0)) throw InvalidInput("regimes: kappa must lie in (0, 2)");
  const double lg = std::abs(std::log(h));
  RemainderEstimate e;
  e.bound_2_81 = (std::pow(mu, 2.0 * kappa + 1.0) + std::pow(mu, 3.0 * kappa)) / h +
                 mu * mu * std::pow(h, -0.5 - kappa) * std::sqrt(lg) + std::pow(h, -1.0 - kappa) / mu;
  e.bound_2_67 = std::pow(std::pow(mu, 4) * h * lg, 2.0 / 3.0) * std::pow(h, -1.0 - kappa) +
                 std::pow(mu, 2.0 * kappa + 1.0) / h;
  e.bound_2_48 = (std::pow(mu, 2.0 * kappa + 1.0) + std::pow(mu, 3.0 * kappa)) / h +
                 std::pow(mu, 2.5) * std::pow(h, -0.5 - kappa) + std::pow(h, -1.0 - kappa) / mu;
  switch (regime_classify(mu, h)) {
    case Regime::weak:
      e.branch = Branch::b281;
      e.value = e.bound_2_81;
      break;
    case Regime::intermediate:
      e.branch = Branch::b267;
      e.value = e.bound_2_67;
      break;
    case Regime::strong:
      e.branch = Branch::none;
      e.value = std::numeric_limits<double>::quiet_NaN();
      break;
  }
  return e;
}

RegimeReport report(double mu, double h, int m, double kappa, double delta) {
  auto r = thresholds(mu, h, m, delta);
  const auto e = remainder_estimate(mu, h, kappa);
  r.kappa = kappa;
  r.bound_2_81 = e.bound_2_81;
  r.bound_2_67 = e.bound_2_67;
  r.bound_2_48 = e.bound_2_48;
  r.applicable = e.branch;
  return r;
}

}  // namespace magweyl::regimes
