#pragma once

#include <string_view>

#include <json.hpp>

namespace magweyl::regimes {

enum class Regime { weak, intermediate, strong };
enum class Branch { b281, b267, none };

std::string_view to_string(Regime r);
std::string_view to_string(Branch b);

/// Threshold scales, classification and headline remainder expressions.
/// All unnamed constants are 1; |log h| is |ln h|.
struct RegimeReport {
  double mu{0.0};
  double h{0.0};
  int m{2};
  double delta{0.05};
  double kappa{0.0};  // 0 when no remainder was requested
  double T_star{0.0};
  double T2_star{0.0};
  double T3_star{0.0};
  double T4_star{0.0};
  double rho_bar{0.0};
  Regime regime{Regime::weak};
  double bound_2_81{0.0};
  double bound_2_67{0.0};
  double bound_2_48{0.0};
  Branch applicable{Branch::none};
};

/// Numbers are emitted as decimal strings with 17 significant digits; the
/// bounds and branch only when kappa > 0.
nlohmann::json to_json(const RegimeReport& r);

/// h |ln h|.
double h_log(double h);
/// (h |ln h|)^{-1/4}: weak / intermediate boundary.
double weak_boundary(double h);
/// (h |ln h|)^{-2/5}: intermediate / strong boundary.
double strong_boundary(double h);

/// T* = min(mu^m h^{1+delta}, 1), T2* = (mu h |ln h|)^{1/3},
/// T3* = (mu h |ln h|)^{2/3} above the strong boundary and 1/mu below it,
/// T4* = mu^3 h |ln h|, rho = (mu h |ln h|)^{1/2}; also fills `regime`.
/// InvalidInput unless mu > 0, 0 < h < 1, m in {2, 3}, delta >= 0.
RegimeReport thresholds(double mu, double h, int m, double delta = 0.05);

/// weak if mu <= weak_boundary(h), intermediate up to strong_boundary(h), strong beyond.
Regime regime_classify(double mu, double h);

struct RemainderEstimate {
  double value{0.0};  // NaN for Branch::none
  Branch branch{Branch::none};
  double bound_2_81{0.0};
  double bound_2_67{0.0};
  double bound_2_48{0.0};
};

/// The three remainder expressions; the branch follows regime_classify
/// (weak: b281, intermediate: b267, strong: none). InvalidInput unless
/// 0 < kappa < 2 and the scalars are valid.
RemainderEstimate remainder_estimate(double mu, double h, double kappa);

/// thresholds plus remainder_estimate in one report.
RegimeReport report(double mu, double h, int m, double kappa, double delta = 0.05);

}  // namespace magweyl::regimes
