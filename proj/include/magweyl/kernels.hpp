#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "magweyl/specfun.hpp"
#include "magweyl/types.hpp"

namespace magweyl::kernels {

/// Parameters of the model operator
///   A = (1/2)((h D_2)^2 + (h D_1 - mu x_2)^2 - W - 2 v x_2).
struct ModelParams {
  double mu{1.0};
  double h{0.1};
  double W{1.0};
  double v{0.0};
  int n_max{64};  // Landau truncation; levels n >= n_max must be inactive

  /// Throws InvalidInput unless mu > 0, 0 < h <= 1, mu*h <= 1, W > 0, n_max >= 0.
  void validate() const;
};

nlohmann::json to_json(const ModelParams& p);
ModelParams model_params_from_json(const nlohmann::json& j);

/// Smallest n_max that is valid for v = 0: level_count(mu, h, W) (at least 1).
int default_n_max(double mu, double h, double W);

struct KernelOptions {
  int order{20};             // Gauss-Legendre points per panel
  double panel_scale{1.0};   // panel length multiplier (smaller = finer)
  bool verify{true};         // recompute with halved panels and compare
  double tolerance{1e-8};    // relative tolerance of that comparison
};

/// Gauge factor exp(i (mu/h) ((x2+y2)/2 - v/mu^2) (x1-y1)) of the model kernel.
Complex gauge_phase(double mu, double h, double v, const Vec2& x, const Vec2& y);

/// Exact spectral projector kernel e(x, y, 0) of the model operator.
///
/// With a = sqrt(mu/h), p = a (x2-y2)/2 and c = a (x1-y1), the gauge-stripped
/// kernel is
///   (mu/(2 pi h)) sum_n int Y_n(p - w) Y_n(-p - w) e^{i c w} dw
/// over the w where (2n+1) mu h <= W + v (x2+y2) + 2 v w / a - v^2/mu^2.
/// Each level is integrated over |w| <= sqrt(2n+1) + 8 - |p| (outside, the
/// Hermite envelopes are below 1e-14) with composite Gauss-Legendre panels.
///
/// Errors: TruncationError if some level n >= n_max is active for the pair,
/// AccuracyError if the verification pass disagrees by more than
/// tolerance * max(|e|, 1e-3 mu/(2 pi h)).
class ModelKernel {
 public:
  explicit ModelKernel(const ModelParams& p, const KernelOptions& opt = {});

  Complex operator()(const Vec2& x, const Vec2& y) const;
  /// Kernel without the gauge factor; real when v = 0.
  Complex stripped(const Vec2& x, const Vec2& y) const;
  /// e(x, x, 0); depends on x2 only.
  double diagonal(const Vec2& x) const;

  [[nodiscard]] const ModelParams& params() const { return p_; }
  [[nodiscard]] const KernelOptions& options() const { return opt_; }

 private:
  Complex integrate(const Vec2& x, const Vec2& y, double panel_scale) const;

  ModelParams p_;
  KernelOptions opt_;
};

/// One-shot evaluation with default options.
Complex model_kernel(const ModelParams& p, const Vec2& x, const Vec2& y);

/// n-th Landau projector, closed form
///   gauge * (mu/(2 pi h)) L_n(r^2/2) e^{-r^2/4},  r^2 = mu |x-y|^2 / h,
/// with the gauge factor of model_kernel at v = 0.
Complex landau_projector_kernel(int n, double mu, double h, const Vec2& x, const Vec2& y);

/// Non-magnetic Weyl kernel for the quadratic form g(xi) = xi^T metric^{-1} xi:
///   sqrt(det metric) r J_1(r s/h) / (2 pi h s),  r = sqrt(V + 2 tau),
///   s = sqrt((x-y)^T metric (x-y)).
/// Returns 0 when V + 2 tau <= 0. Throws InvalidInput for a non-SPD metric.
double weyl_kernel(double V, double h, double tau, const Mat2& metric, const Vec2& x, const Vec2& y);

enum class PhaseConvention { landau_gauge, stripped };
std::string_view to_string(PhaseConvention c);
PhaseConvention phase_convention_from_string(std::string_view s);

struct GaugeInfo {
  PhaseConvention convention{PhaseConvention::landau_gauge};
  Vec2 center{0.0, 0.0};
};

/// Kernel values e(x_i, y_j, 0) on a product of point lists.
struct SpectralKernelField {
  std::vector<Vec2> points_x;
  std::vector<Vec2> points_y;
  Eigen::MatrixXcd values;
  GaugeInfo gauge;
  ModelParams params;

  /// Throws SymmetryError if sampled pairs (x, y), (y, x) are not conjugate to
  /// 1e-10 relative, or a diagonal value is not real and nonnegative to 1e-10.
  void check_invariants() const;

  /// CSV rows x1,x2,y1,y2,re,im with 17 significant digits.
  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

SpectralKernelField read_field_csv(std::istream& is, const ModelParams& params);
SpectralKernelField field_from_json(const nlohmann::json& j);

/// All pairwise values over `axis` (parallel over rows).
SpectralKernelField kernel_grid(const ModelParams& p, const std::vector<Vec2>& axis,
                                const KernelOptions& opt = {});

/// J = int e(x, x, 0) psi(x) dx by a tensor Gauss-Legendre rule on `window`.
/// The result is recomputed with twice the order; a relative change above 1e-6
/// raises AccuracyError. Other rule kinds are rejected with InvalidInput.
double local_count(const ModelParams& p, const PlaneFn& psi, const specfun::QuadratureRule& quad,
                   const Box& window);

}  // namespace magweyl::kernels
