#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace magweyl::harness {

inline constexpr std::string_view kVersion = "0.1.0";

struct PowerFit {
  double exponent{0.0};
  double log_intercept{0.0};
  double r_squared{0.0};
  int n_points{0};
};

/// Least squares for log y = exponent log x + intercept. InvalidInput for
/// nonpositive or non-finite values or repeated x; InsufficientData below 3 points.
/// r_squared is 1 when y is constant.
PowerFit fit_power_law(const std::vector<std::pair<double, double>>& points);
nlohmann::json to_json(const PowerFit& f);

/// Flat key = value file with [section] headers; keys are read as "section.key".
/// Comments start with ';' or '#'. InvalidInput on syntax errors.
class Config {
 public:
  static Config parse(std::istream& is);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }
  [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double number(const std::string& key, double fallback) const;
  [[nodiscard]] long long integer(const std::string& key, long long fallback) const;
  /// Comma separated list; empty when the key is absent.
  [[nodiscard]] std::vector<double> numbers(const std::string& key) const;
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class Quantity { dirac_gap, kernel_trace, drift_error, intersection_count, duhamel_residual };
enum class DiracPath { radial, full };

std::string_view to_string(Quantity q);
Quantity quantity_from_string(std::string_view s);

struct SweepConfig {
  Quantity quantity{Quantity::dirac_gap};
  std::vector<double> mu{2.0};
  std::vector<double> h;
  std::vector<int> ladder_k;  // when set, h = 1 / (mu (2k + 1/2)) for each mu
  double kappa{0.5};
  double sigma{0.5};          // Gaussian cutoff width
  double W{1.0};
  DiracPath path{DiracPath::radial};
  double gradient{0.2};       // dV/dx2 of the geometry field V = 1 + gradient x2
  int periods{20};            // cyclotron periods for drift runs
  int instances{20};          // random instances for duhamel_residual
  double t{0.2};
  double nu{0.3};
  std::uint64_t seed{1};
  int workers{0};             // 0: worker_count()
  std::string output;

  /// Sections: [sweep] quantity, mu, h, ladder_k, kappa, seed, output;
  /// [model] W, path; [cutoff] sigma; [geometry] gradient, periods;
  /// [duhamel] instances, t, nu.
  static SweepConfig from_config(const Config& c);
  void validate() const;
  /// (mu, h) grid in row order.
  [[nodiscard]] std::vector<std::pair<double, double>> cells() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Numeric table; failed rows carry NaN values and a message in `status`.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> status;

  [[nodiscard]] std::size_t failed() const;
  /// Header plus rows, 17 significant digits, status as the last column.
  void write_csv(std::ostream& os) const;
  /// Gnuplot columns: '#'-prefixed header, NaN for failed cells.
  void write_dat(std::ostream& os) const;
  /// Values of column `y` against column `x` over successful rows where `filter` matches.
  [[nodiscard]] std::vector<std::pair<double, double>> series(const std::string& x, const std::string& y,
                                                              const std::string& key = "",
                                                              double key_value = 0.0) const;
  [[nodiscard]] std::size_t column(const std::string& name) const;
};

struct SweepResult {
  Table table;
  std::vector<std::pair<std::string, PowerFit>> fits;  // label, fit
  nlohmann::json summary;
};

/// I_exact (v = 0 model) against the flat Weyl reference with V = W at every
/// (mu, h); relative gap fitted against h at each mu.
SweepResult sweep_dirac_gap(const SweepConfig& cfg);
/// Diagonal of the model kernel against the magnetic Weyl density.
SweepResult sweep_kernel_trace(const SweepConfig& cfg);
/// drift_error or intersection_count on V = 1 + gradient x2, F = 1.
SweepResult sweep_geometry(const SweepConfig& cfg);
/// ||U - S_K|| against (nu t / h)^{K+1} / (K+1)! on seeded random instances.
SweepResult sweep_duhamel_residual(const SweepConfig& cfg);
SweepResult run_sweep(const SweepConfig& cfg);

/// Run manifest: parameters, version, seed, outputs and wall time.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& parameters,
                             const std::vector<std::string>& outputs, std::uint64_t seed, double wall_seconds);

struct CheckLine {
  std::string name;
  double value{0.0};
  double tolerance{0.0};
  bool pass{false};
};

/// Fast invariant suite across all modules (a few seconds).
std::vector<CheckLine> selftest();
void write_checks_csv(std::ostream& os, const std::vector<CheckLine>& lines);

}  // namespace magweyl::harness
