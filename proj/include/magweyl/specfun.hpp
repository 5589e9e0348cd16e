#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace magweyl::specfun {

inline constexpr int kDefaultHermiteMax = 2048;
inline constexpr int kLaguerreMax = 512;

// pi^{-1/4}, the value of the ground Hermite function at the origin.
inline constexpr double kPiQuarterInv = 0.75112554446494248286;

/// L2-orthonormal Hermite function Y_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) e^{-x^2/2}.
///
/// Computed by the three-term recurrence on the normalized functions
///   Y_{k+1} = sqrt(2/(k+1)) x Y_k - sqrt(k/(k+1)) Y_{k-1},
/// with the Gaussian factor carried as a separate exponent when |x| > 30 so that
/// no intermediate under- or overflows for n <= 2048, |x| <= 60.
/// Throws TruncationError if n > n_max and InvalidInput if x is not finite.
double hermite_fn(int n, double x, int n_max = kDefaultHermiteMax);

/// Y_0(x) ... Y_{n_max}(x) from a single recurrence pass.
std::vector<double> hermite_batch(int n_max, double x, int limit = kDefaultHermiteMax);

/// Same as hermite_batch but writes into `out` (size n_max + 1); no allocation.
void hermite_batch_into(double x, std::span<double> out);

/// Unnormalized recurrence: writes q_k with Y_k(x) = q_k(x) * exp(-x^2/2) and
/// q_0 = pi^{-1/4}. Only valid while the q_k stay finite (|x| <~ 25 for n ~ 100).
/// Used in hot loops where the Gaussian factors of a product are combined.
void hermite_poly_part(double x, std::span<double> out);

/// Laguerre polynomial L_n(x) by the forward recurrence, n <= 512.
double laguerre_poly(int n, double x);

/// Bessel function J_1(x) for x >= 0, absolute error below 1e-12.
/// Power series for x < 8, Miller backward recurrence for 8 <= x < 25 and the
/// Hankel asymptotic expansion beyond.
double bessel_j1(double x);

enum class RuleKind { gauss_hermite, gauss_legendre, tanh_sinh };

std::string_view to_string(RuleKind kind);
RuleKind rule_kind_from_string(std::string_view name);

/// Immutable quadrature rule on a canonical interval.
///
/// gauss_legendre: [-1, 1].
/// gauss_hermite: the real line; `weights` are the e^{x^2}-compensated weights,
///   i.e. sum_i w_i f(x_i) approximates the plain integral of f. The Gaussian
///   weights proper are w_i exp(-x_i^2) (see gaussian_weight()).
/// tanh_sinh: [0, 1], nodes clustered double-exponentially at 0 (down to ~1e-300)
///   to absorb integrable endpoint singularities there. Nodes that would round to
///   1 are dropped; their weights are below 1e-17.
struct QuadratureRule {
  RuleKind kind{};
  int order{};
  std::vector<double> nodes;
  std::vector<double> weights;
  double lower{};
  double upper{};

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  [[nodiscard]] double gaussian_weight(std::size_t i) const;

  /// Integral of f over [a, b] by the affine image of the rule
  /// (gauss_legendre and tanh_sinh only).
  [[nodiscard]] double integrate(double a, double b, const std::function<double(double)>& f) const;
  /// Plain integral of f over the real line (gauss_hermite, compensated weights)
  /// after the substitution x = center + scale * t.
  [[nodiscard]] double integrate_line(double center, double scale,
                                      const std::function<double(double)>& f) const;
};

/// Build a rule; order in [2, 4096]. Throws InvalidInput otherwise.
QuadratureRule make_rule(RuleKind kind, int order);

/// Process-wide cache of rules; returned reference stays valid for the program lifetime.
const QuadratureRule& cached_rule(RuleKind kind, int order);

}  // namespace magweyl::specfun
