#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "magweyl/types.hpp"

namespace magweyl::dynamics {

using Vec4 = Eigen::Vector4d;

/// Magnetic field data. metric returns g^{jk}; vecpot the 1-form (V_1, V_2);
/// potential V. The optional derivative callbacks make the flow exact; without
/// them central differences are used.
struct ModelField {
  std::function<Mat2(const Vec2&)> metric;
  std::function<Vec2(const Vec2&)> vecpot;
  std::function<double(const Vec2&)> potential;
  double mu{1.0};

  std::function<Mat2(const Vec2&)> vecpot_jacobian;      // (j, m) -> d_m V_j
  std::function<Vec2(const Vec2&)> potential_gradient;
  std::function<std::array<Mat2, 2>(const Vec2&)> metric_gradient;  // [m] -> d_m g^{jk}

  /// Samples a 9 x 9 grid of `domain`: metric SPD, V >= eps, |F| >= eps and,
  /// when eps0 > 0, |grad(V/F)| >= eps0. InvalidInput on failure.
  void validate(const Box& domain, double eps = 1e-6, double eps0 = 0.0) const;

  /// Euclidean metric, symmetric gauge F (-x2/2, x1/2), V = V0 + grad . x.
  static ModelField linear(double mu, double F, double V0, const Vec2& grad = Vec2::Zero());
};

struct FlowState {
  Vec2 x{0.0, 0.0};
  Vec2 xi{0.0, 0.0};
  double t{0.0};
};

/// One accepted step with its Dormand-Prince continuous extension.
struct DenseStep {
  double t0{0.0};
  double dt{0.0};
  std::array<Vec4, 5> coeff;

  [[nodiscard]] Vec4 value(double t) const;
  [[nodiscard]] Vec4 derivative(double t) const;
};

struct Trajectory {
  std::vector<FlowState> states;
  double energy0{0.0};
  std::vector<Vec2> guiding_center;
  std::vector<int> winding_index;
  std::vector<DenseStep> steps;  // steps[i] joins states[i] and states[i+1]
  ModelField field;
  double max_energy_drift{0.0};

  /// Dense-output state at time t inside the integrated range.
  [[nodiscard]] FlowState state_at(double t) const;
  [[nodiscard]] int windings() const { return winding_index.empty() ? 0 : winding_index.back() + 1; }
  /// Time range [first, last] of states with the given winding index; RangeError if absent.
  [[nodiscard]] std::pair<double, double> winding_span(int n) const;
  /// Unit vector from the first to the last guiding center ((1, 0) if they coincide).
  [[nodiscard]] Vec2 drift_direction() const;

  /// Rows t,x1,x2,xi1,xi2,H with 17 significant digits.
  void write_csv(std::ostream& os) const;
};

struct FlowOptions {
  double tol{1e-11};       // local error tolerance (absolute and relative)
  double max_step{0.0};    // 0: one sixteenth of the initial cyclotron period
  long long max_steps{20'000'000};
};

/// (1/2)(sum g^{jk} (xi_j - mu V_j)(xi_k - mu V_k) - V).
double hamiltonian(const ModelField& f, const FlowState& s);
/// Hamiltonian vector field (dx/dt, dxi/dt).
Vec4 flow_generator(const ModelField& f, const Vec4& y);
/// State at x on the energy level 0 whose velocity points at `angle`.
FlowState energy_shell_state(const ModelField& f, const Vec2& x, double angle);

/// Embedded Dormand-Prince 5(4) with dense output over [s0.t, s0.t + T] (T may be negative).
/// Errors: InvalidInput if |H(s0)| > 100 tol max(1, |V(x0)|); IntegrationError on
/// step-size underflow or energy drift above 100 tol max(1, |V(x0)|).
Trajectory integrate_flow(const ModelField& f, const FlowState& s0, double T, const FlowOptions& opt = {});
inline Trajectory integrate_flow(const ModelField& f, const FlowState& s0, double T, double tol) {
  FlowOptions o;
  o.tol = tol;
  return integrate_flow(f, s0, T, o);
}

/// F = sqrt(det g^{jk}) (d_1 V_2 - d_2 V_1), central differences (step 1e-5, one Richardson step).
double field_intensity(const ModelField& f, const Vec2& x);
/// mu^{-1} (-d_2 (V/F), d_1 (V/F)), same differences.
Vec2 drift_velocity(const ModelField& f, const Vec2& x);
/// Guiding-center velocity of the flow to first order: (2 mu)^{-1} grad(V/F) turned by -pi/2.
Vec2 predicted_drift(const ModelField& f, const Vec2& x);
/// x + (velocity turned by -pi/2) / (mu F).
Vec2 guiding_center(const ModelField& f, const FlowState& s);

/// Least-squares slope of the guiding center over the recorded states.
Vec2 measured_drift(const Trajectory& traj);

struct IntersectionEvent {
  double t_early{0.0};
  double t_late{0.0};
  Vec2 point{0.0, 0.0};
  std::pair<int, int> winding_pair{0, 0};
  double phi{0.0};          // angle of point - guiding center from the pole (drift turned +pi/2)
  bool front{true};         // on the drift-facing side of the early branch
  bool degenerate{false};   // crossing angle below 1e-6
};

nlohmann::json to_json(const IntersectionEvent& e);
nlohmann::json to_json(const std::vector<IntersectionEvent>& events);

/// Transversal crossings of the planar projection. Dense output is sampled
/// into `subdivisions` chords per step, candidate chord pairs come from a
/// spatial hash and each crossing is refined by Newton on the interpolant.
std::vector<IntersectionEvent> self_intersections(const Trajectory& traj, int subdivisions = 4);

/// Number of events having `winding` as either branch.
int intersections_on_winding(const std::vector<IntersectionEvent>& events, int winding);

/// Distance from the point of winding 0 at angle phi (front side) to the
/// nearest point of winding n. RangeError if winding n is missing or n < 0.
double winding_distance(const Trajectory& traj, double phi, int n);

struct Tick {
  int n{0};          // winding crossed by winding 0
  double phi{0.0};   // crossing angle on the upper front quadrant
  double ell{0.0};   // |phi_n - phi_{n+1}|, NaN for the last one
};

/// Crossings of winding 0 with windings n = 1, 2, ... on the upper front quadrant.
/// InsufficientData with fewer than four.
std::vector<Tick> tick_structure(const Trajectory& traj, const std::vector<IntersectionEvent>& events);
std::vector<Tick> tick_structure(const Trajectory& traj);

struct TickFit {
  double n_bar{0.0};        // continuous last-crossing index from (pi/2 - phi)^2 linear in n
  int n_last{0};
  double slope{0.0};        // of log(pi/2 - phi_n) against log(n_bar - n)
  double last_gap{0.0};     // pi/2 - phi of the last crossing
  double last_gap_scaled{0.0};  // last_gap * sqrt(mu)
};

/// Fits the square-root law on the upper half of the ticks.
TickFit fit_tick_law(const std::vector<Tick>& ticks, double mu);

}  // namespace magweyl::dynamics
