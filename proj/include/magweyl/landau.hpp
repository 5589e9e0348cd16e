#pragma once

#include <vector>

namespace magweyl::landau {

/// Constant-coefficient data of the magnetic Schroedinger operator at a point.
struct ModelScalars {
  double mu{1.0};      // coupling (field strength multiplier)
  double h{0.1};       // semiclassical parameter
  double f{1.0};       // field intensity F
  double V{1.0};       // potential value
  double sqrt_g{1.0};  // metric volume factor
  double tau{0.0};     // spectral level

  /// Throws InvalidInput unless mu > 0, 0 < h <= 1, f > 0, sqrt_g > 0 and mu*h <= 1.
  void validate() const;
  [[nodiscard]] double fermi() const { return V + 2.0 * tau; }
};

/// Safety cap on the closed-form level count.
inline constexpr long long kLevelCountGuard = 1'000'000;

/// Landau levels (1/2)((2n+1) mu h f - V), n = 0..n_max.
std::vector<double> landau_levels(const ModelScalars& s, int n_max);

/// Number of filled levels #{n >= 0 : (2n+1) mu h f <= V + 2 tau}.
///
/// A level exactly at threshold is counted (right-continuous step); "exactly"
/// allows a relative slack of 1e-12 so rounding in mu*h*f does not decide it.
/// Throws TruncationError above kLevelCountGuard.
long long level_count(const ModelScalars& s);

/// Magnetic Weyl density (2 pi)^{-1} N mu h^{-1} f sqrt_g.
double magnetic_weyl_density(const ModelScalars& s);

/// Non-magnetic Weyl density (V + 2 tau) sqrt_g / (4 pi h^2); zero for an empty ellipse.
double weyl_density_diag(const ModelScalars& s);

}  // namespace magweyl::landau
