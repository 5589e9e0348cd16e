#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "magweyl/kernels.hpp"
#include "magweyl/specfun.hpp"
#include "magweyl/types.hpp"

namespace magweyl::dirac {

/// Pair weight Omega(x, y; z), homogeneous of degree -kappa in z; the functional
/// uses omega(x, y) = Omega(x, y; x - y).
using OmegaFn = std::function<double(const Vec2& x, const Vec2& y, const Vec2& z)>;

struct SingularWeight {
  double kappa{1.0};
  OmegaFn omega;
  bool homogeneity_checked{false};
  bool plain{false};  // constant weight, no diagonal singularity (kappa = 0)
  std::optional<double> isotropic_coeff;  // set when Omega = coeff |z|^{-kappa}

  /// coeff |x-y|^{-kappa}, kappa in (0, 2).
  static SingularWeight isotropic(double kappa, double coeff = 1.0);
  /// omega == value; the kappa -> 0 limit.
  static SingularWeight constant(double value = 1.0);
  /// General weight; homogeneity in z is verified at t in {0.5, 2, 4} to 1e-8
  /// relative on a fixed sample, InvalidInput otherwise.
  static SingularWeight general(double kappa, OmegaFn omega);

  double operator()(const Vec2& x, const Vec2& y) const { return omega(x, y, x - y); }
};

/// Cut-off functions. psi_i vanishes outside the disk (center_i, support_radius);
/// an optional box tightens the support (used for the outer rule and for plain weights).
struct CutoffPair {
  PlaneFn psi1;
  PlaneFn psi2;
  double support_radius{1.0};
  Vec2 center1{0.0, 0.0};
  Vec2 center2{0.0, 0.0};
  std::optional<Box> box1;
  std::optional<Box> box2;

  [[nodiscard]] Box support_box1() const;
  [[nodiscard]] Box support_box2() const;
  /// Spot-checks values in [0, 1] and vanishing outside the support; InvalidInput otherwise.
  void validate() const;

  /// exp(-|x-c|^2 / (2 sigma^2)) cut at radius 8 sigma.
  static CutoffPair gaussian(double sigma, const Vec2& c1 = Vec2(0, 0), const Vec2& c2 = Vec2(0, 0));
  /// Indicator of [0, 1]^2 for both.
  static CutoffPair unit_square();
};

struct QuadratureSpec {
  specfun::QuadratureRule outer_rule;   // gauss_legendre, tensor rule over the psi_2 box
  specfun::QuadratureRule radial_rule;  // tanh_sinh on the innermost radial panel
  double split_radius{0.5};             // gamma
  int angular_order{32};                // Gauss-Legendre points on each circle arc
  double far_panel_width{0.1};          // radial panel width beyond gamma
  int far_order{16};                    // Gauss-Legendre points per radial panel
  double kernel_range{std::numeric_limits<double>::infinity()};  // |e|^2 taken as 0 beyond
  bool check_convergence{true};         // rerun with doubled radial and angular orders
  double convergence_tolerance{5e-3};
  double symmetry_tolerance{1e-9};

  /// Throws InvalidInput on wrong rule kinds or split radius not in (0, support_radius).
  void validate(const CutoffPair& c) const;
  /// Same spec with radial and angular resolution doubled.
  [[nodiscard]] QuadratureSpec refined() const;
};

/// Defaults: gamma = min(R/4, 8 core_length), far panels of width panel_width,
/// outer order 32, radial tanh-sinh order 48, angular order 24.
QuadratureSpec default_quadrature(const CutoffPair& c, double core_length, double panel_width);
/// core_length = sqrt(h/mu), panel width 2 sqrt(h/mu) / sqrt(2N+1), kernel range
/// (2 sqrt(2N+1) + 8) sqrt(h/mu) beyond which |e|^2 is negligible.
QuadratureSpec model_quadrature(const kernels::ModelParams& p, const CutoffPair& c);
/// core_length = h / sqrt(V + 2 tau), panel width twice that; no kernel range.
QuadratureSpec weyl_quadrature(double V, double h, double tau, const CutoffPair& c);

struct DiracResult {
  double value{0.0};
  double imag_residual{0.0};
  double refined_value{std::numeric_limits<double>::quiet_NaN()};
  double relative_change{0.0};
  std::size_t kernel_evaluations{0};
};

/// I = int int omega(x,y) e(x,y) psi_2(x) e(y,x) psi_1(y) dx dy.
///
/// For every outer node x the y-integral is done in polar coordinates around x.
/// In r: tanh-sinh on [0, min(gamma, far_panel_width)] (absorbs r^{1-kappa}),
/// composite Gauss-Legendre on the rest of the gamma-patch and beyond gamma,
/// with panel breaks at gamma. In the angle: Gauss-Legendre on the arc inside
/// the psi_1 disk (angular_order points per arc length pi R / 2, more on longer
/// arcs). Plain weights use a tensor rule over the psi_1 box instead.
/// e(x,y) and e(y,x) are evaluated separately.
/// Errors: SymmetryError if |Im I| > symmetry_tolerance |I|; AccuracyError if
/// the refined pass changes I by more than convergence_tolerance (relative).
DiracResult dirac_energy_detailed(const KernelFn& e, const SingularWeight& w, const CutoffPair& c,
                                  const QuadratureSpec& q);
double dirac_energy(const KernelFn& e, const SingularWeight& w, const CutoffPair& c, const QuadratureSpec& q);

/// Precomputed-field variant: points_x must equal points_y, `weights` are the
/// quadrature weights of those nodes. Off-diagonal pairs are summed directly;
/// each node's own cell is replaced by a disk of equal area carrying
/// |e(x,x)|^2 times the angular mean of Omega(x, x; theta) r^{-kappa}.
/// First-order accurate in the cell size.
double dirac_energy_field(const kernels::SpectralKernelField& f, const std::vector<double>& weights,
                          const SingularWeight& w, const CutoffPair& c);

/// |e|^2 as a function of |x - y|.
using RadialFn = std::function<double(double)>;

/// |e(x,y)|^2 of the v = 0 model from the Laguerre closed form.
double model_kernel_sq(const kernels::ModelParams& p, double s);
/// |e(x,y)|^2 of the Euclidean Weyl kernel.
double weyl_kernel_sq(double V, double h, double tau, double s);

/// Pair correlation M(s) = int psi_2(x) int_0^{2 pi} psi_1(x + s theta) d theta dx.
double pair_correlation(const CutoffPair& c, double s, int outer_order = 40, int angular_order = 64);

/// I = coeff int_0^inf K(s) s^{1-kappa} M(s) ds for isotropic weights; the
/// s-axis uses the same split, rules and range as the 2-D path.
DiracResult radial_dirac_energy_detailed(const RadialFn& K, const SingularWeight& w, const CutoffPair& c,
                                         const QuadratureSpec& q);
double radial_dirac_energy(const RadialFn& K, const SingularWeight& w, const CutoffPair& c,
                           const QuadratureSpec& q);
/// Model operator with v = 0 (InvalidInput otherwise).
double radial_dirac_energy(const kernels::ModelParams& p, const SingularWeight& w, const CutoffPair& c,
                           const QuadratureSpec& q);

/// Weyl reference value: dirac_energy with e = weyl_kernel(V, h, tau, metric).
double weyl_reference(double V, double h, double tau, const Mat2& metric, const SingularWeight& w,
                      const CutoffPair& c, const QuadratureSpec& q);
/// Euclidean metric and isotropic weight through the radial path.
double radial_weyl_reference(double V, double h, double tau, const SingularWeight& w, const CutoffPair& c,
                             const QuadratureSpec& q);

/// Deterministic pairwise (fixed binary tree) sum.
double pairwise_sum(const std::vector<double>& v);
Complex pairwise_sum(const std::vector<Complex>& v);

}  // namespace magweyl::dirac
