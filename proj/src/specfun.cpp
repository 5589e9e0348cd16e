#include "magweyl/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "magweyl/errors.hpp"
#include "magweyl/types.hpp"

namespace magweyl::specfun {

namespace {

constexpr double kPlainRangeLimit = 30.0;
constexpr double kRescaleThreshold = 0x1p500;
constexpr int kRescaleBits = 500;

void check_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw InvalidInput(std::string(what) + ": argument is not finite");
  }
}

// Orthonormal recurrence carried as ldexp(mantissa, exp2). The Gaussian factor
// is split as 2^a * exp(r) once, and rescaling is by exact powers of two, so all
// returned values share the same rounding of the Gaussian.
// Calls visit(k, mantissa_k, exp2_k) for k = 0..n.
template <typename Visit>
void scaled_hermite_recurrence(int n, double x, Visit&& visit) {
  const double g = -0.5 * x * x;
  const double a = std::nearbyint(g / std::numbers::ln2);
  int exp2 = static_cast<int>(a);
  double prev = 0.0;
  double cur = kPiQuarterInv * std::exp(g - a * std::numbers::ln2);
  visit(0, cur, exp2);
  const double two_x = std::sqrt(2.0) * x;
  for (int k = 0; k < n; ++k) {
    const double next = (two_x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                        std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
    if (std::abs(cur) > kRescaleThreshold) {
      cur = std::ldexp(cur, -kRescaleBits);
      prev = std::ldexp(prev, -kRescaleBits);
      exp2 += kRescaleBits;
    }
    visit(k + 1, cur, exp2);
  }
}

double combine(double mantissa, int exp2) { return std::ldexp(mantissa, exp2); }

}  // namespace

double hermite_fn(int n, double x, int n_max) {
  if (n < 0) throw InvalidInput("hermite_fn: negative index");
  if (n > n_max) {
    throw TruncationError("hermite_fn: index " + std::to_string(n) + " exceeds n_max " +
                          std::to_string(n_max));
  }
  check_finite(x, "hermite_fn");
  if (std::abs(x) <= kPlainRangeLimit) {
    double prev = 0.0;
    double cur = kPiQuarterInv * std::exp(-0.5 * x * x);
    const double two_x = std::sqrt(2.0) * x;
    for (int k = 0; k < n; ++k) {
      const double next =
          (two_x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
    }
    return cur;
  }
  double result = 0.0;
  scaled_hermite_recurrence(n, x, [&](int k, double m, int e2) {
    if (k == n) result = combine(m, e2);
  });
  return result;
}

void hermite_batch_into(double x, std::span<double> out) {
  check_finite(x, "hermite_batch");
  if (out.empty()) return;
  const int n = static_cast<int>(out.size()) - 1;
  if (std::abs(x) <= kPlainRangeLimit) {
    out[0] = kPiQuarterInv * std::exp(-0.5 * x * x);
    if (n == 0) return;
    const double two_x = std::sqrt(2.0) * x;
    out[1] = two_x * out[0];
    for (int k = 1; k < n; ++k) {
      out[k + 1] = (two_x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                   std::sqrt(static_cast<double>(k + 1));
    }
    return;
  }
  scaled_hermite_recurrence(n, x, [&](int k, double m, int e2) { out[k] = combine(m, e2); });
}

std::vector<double> hermite_batch(int n_max, double x, int limit) {
  if (n_max < 0) throw InvalidInput("hermite_batch: negative n_max");
  if (n_max > limit) {
    throw TruncationError("hermite_batch: n_max " + std::to_string(n_max) + " exceeds limit " +
                          std::to_string(limit));
  }
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1);
  hermite_batch_into(x, out);
  return out;
}

void hermite_poly_part(double x, std::span<double> out) {
  if (out.empty()) return;
  const std::size_t n = out.size() - 1;
  out[0] = kPiQuarterInv;
  if (n == 0) return;
  const double two_x = std::sqrt(2.0) * x;
  out[1] = two_x * out[0];
  // Recurrence coefficients are cheap enough to recompute; sqrt is a single instruction.
  for (std::size_t k = 1; k < n; ++k) {
    out[k + 1] = (two_x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
  }
}

double laguerre_poly(int n, double x) {
  if (n < 0 || n > kLaguerreMax) {
    throw InvalidInput("laguerre_poly: index out of range [0, 512]");
  }
  check_finite(x, "laguerre_poly");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 1.0 - x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

namespace {

double j1_series(double x) {
  const double half = 0.5 * x;
  const double q = -half * half;
  double term = half;
  double sum = term;
  for (int k = 1; k < 60; ++k) {
    term *= q / (static_cast<double>(k) * (k + 1));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// Miller's algorithm: backward recurrence from a large even start index,
// normalized with J_0 + 2 sum_k J_{2k} = 1.
double j1_miller(double x) {
  const int start = 2 * ((static_cast<int>(x) + 40 + static_cast<int>(6.0 * std::cbrt(x))) / 2);
  double next = 0.0;
  double cur = 1e-30;
  double j1 = 0.0;
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double prev = (2.0 * k / x) * cur - next;
    next = cur;
    cur = prev;  // cur is now J_{k-1}
    if (k - 1 == 1) j1 = cur;
    if ((k - 1) % 2 == 0) norm += (k - 1 == 0 ? 1.0 : 2.0) * cur;
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      j1 *= 1e-250;
      norm *= 1e-250;
    }
  }
  return j1 / norm;
}

double j1_asymptotic(double x) {
  // P and Q of the Hankel expansion with mu = 4 nu^2 = 4.
  const double mu = 4.0;
  double p = 1.0;
  double q = 0.0;
  double term = 1.0;
  const double inv8x = 1.0 / (8.0 * x);
  double last_abs = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) * inv8x / k;
    const double a = std::abs(term);
    if (a > last_abs || a < 1e-18) break;
    last_abs = a;
    // k odd -> Q with sign (-1)^{(k-1)/2}; k even -> P with sign (-1)^{k/2}
    if (k % 2 == 1) {
      q += (((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    } else {
      p += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    }
  }
  const double s = std::sin(x);
  const double c = std::cos(x);
  const double cos_chi = (s - c) * std::numbers::sqrt2 * 0.5;
  const double sin_chi = -(s + c) * std::numbers::sqrt2 * 0.5;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * cos_chi - q * sin_chi);
}

}  // namespace

double bessel_j1(double x) {
  if (!std::isfinite(x) || x < 0.0) {
    throw InvalidInput("bessel_j1: argument must be finite and nonnegative");
  }
  if (x == 0.0) return 0.0;
  if (x < 8.0) return j1_series(x);
  if (x < 25.0) return j1_miller(x);
  return j1_asymptotic(x);
}

std::string_view to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::gauss_hermite: return "gauss_hermite";
    case RuleKind::gauss_legendre: return "gauss_legendre";
    case RuleKind::tanh_sinh: return "tanh_sinh";
  }
  return "unknown";
}

RuleKind rule_kind_from_string(std::string_view name) {
  if (name == "gauss_hermite") return RuleKind::gauss_hermite;
  if (name == "gauss_legendre") return RuleKind::gauss_legendre;
  if (name == "tanh_sinh") return RuleKind::tanh_sinh;
  throw InvalidInput("unsupported quadrature kind: " + std::string(name));
}

double QuadratureRule::gaussian_weight(std::size_t i) const {
  if (kind != RuleKind::gauss_hermite) return weights[i];
  return weights[i] * std::exp(-nodes[i] * nodes[i]);
}

double QuadratureRule::integrate(double a, double b, const std::function<double(double)>& f) const {
  if (kind == RuleKind::gauss_hermite) {
    throw InvalidInput("integrate: gauss_hermite rules act on the real line; use integrate_line");
  }
  const double scale = (b - a) / (upper - lower);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sum += weights[i] * f(a + (nodes[i] - lower) * scale);
  }
  return sum * scale;
}

double QuadratureRule::integrate_line(double center, double scale,
                                      const std::function<double(double)>& f) const {
  if (kind != RuleKind::gauss_hermite) {
    throw InvalidInput("integrate_line: requires a gauss_hermite rule");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sum += weights[i] * f(center + scale * nodes[i]);
  }
  return sum * scale;
}

namespace {

QuadratureRule gauss_legendre(int n) {
  QuadratureRule rule{RuleKind::gauss_legendre, n, {}, {}, -1.0, 1.0};
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Y_{n-1}, Y_n at x as mantissas sharing one binary exponent.
struct HermitePair {
  double prev;
  double cur;
  int exp2;
};

HermitePair hermite_top_pair(int n, double x) {
  HermitePair out{0.0, 0.0, 0};
  double last_m = 0.0;
  int last_e2 = 0;
  scaled_hermite_recurrence(n, x, [&](int k, double m, int e2) {
    if (k == n - 1) {
      last_m = m;
      last_e2 = e2;
    }
    if (k == n) {
      out.cur = m;
      out.exp2 = e2;
      // Rescaling may have happened between n-1 and n.
      out.prev = std::ldexp(last_m, last_e2 - e2);
    }
  });
  return out;
}

QuadratureRule gauss_hermite(int n) {
  QuadratureRule rule{RuleKind::gauss_hermite, n, {}, {}, -INFINITY, INFINITY};
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw AccuracyError("gauss_hermite: Jacobi eigenvalue solve failed");
  }
  Eigen::VectorXd roots = solver.eigenvalues();
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double sqrt2n = std::sqrt(2.0 * n);
  for (int i = 0; i < n; ++i) {
    double z = roots[i];
    HermitePair hp{};
    for (int it = 0; it < 6; ++it) {
      hp = hermite_top_pair(n, z);
      // Y_n' = sqrt(2n) Y_{n-1} - x Y_n
      const double deriv = sqrt2n * hp.prev - z * hp.cur;
      const double dz = hp.cur / deriv;
      z -= dz;
      if (std::abs(dz) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    hp = hermite_top_pair(n, z);
    const double log_abs_prev = std::log(std::abs(hp.prev)) + hp.exp2 * std::numbers::ln2;
    rule.nodes[i] = z;
    rule.weights[i] = std::exp(-std::log(static_cast<double>(n)) - 2.0 * log_abs_prev);
  }
  // Enforce exact antisymmetry of the nodes.
  for (int i = 0; i < n / 2; ++i) {
    const double z = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[n - 1 - i] + rule.weights[i]);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Double-exponential rule on [0, 1] via s = 1 / (1 + exp(-pi sinh t)).
QuadratureRule tanh_sinh(int n) {
  constexpr double kHalfRange = 5.5;
  QuadratureRule rule{RuleKind::tanh_sinh, n, {}, {}, 0.0, 1.0};
  const double step = 2.0 * kHalfRange / (n - 1);
  rule.nodes.reserve(n);
  rule.weights.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double t = -kHalfRange + k * step;
    const double u = 0.5 * kPi * std::sinh(t);
    // s = (1 + tanh u) / 2 evaluated without cancellation on either side.
    const double s = (u < 0.0) ? 1.0 / (1.0 + std::exp(-2.0 * u)) : 1.0 - 1.0 / (1.0 + std::exp(2.0 * u));
    const double sech = 1.0 / std::cosh(u);
    const double ds = 0.25 * kPi * std::cosh(t) * sech * sech;
    if (!(s > 0.0) || !(s < 1.0)) continue;
    if (!rule.nodes.empty() && !(s > rule.nodes.back())) continue;
    rule.nodes.push_back(s);
    rule.weights.push_back(step * ds);
  }
  return rule;
}

}  // namespace

QuadratureRule make_rule(RuleKind kind, int order) {
  if (order < 2 || order > 4096) {
    throw InvalidInput("make_rule: order " + std::to_string(order) + " outside [2, 4096]");
  }
  switch (kind) {
    case RuleKind::gauss_legendre: return gauss_legendre(order);
    case RuleKind::gauss_hermite: return gauss_hermite(order);
    case RuleKind::tanh_sinh: return tanh_sinh(order);
  }
  throw InvalidInput("make_rule: unsupported kind");
}

const QuadratureRule& cached_rule(RuleKind kind, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  const std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(static_cast<int>(kind), order);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::make_unique<QuadratureRule>(make_rule(kind, order))).first;
  }
  return *it->second;
}

}  // namespace magweyl::specfun
