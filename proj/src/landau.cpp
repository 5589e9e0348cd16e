#include "magweyl/landau.hpp"

#include <cmath>
#include <string>

#include "magweyl/errors.hpp"
#include "magweyl/types.hpp"

namespace magweyl::landau {

namespace {
constexpr double kThresholdSlack = 1e-12;
}

void ModelScalars::validate() const {
  for (double v : {mu, h, f, V, sqrt_g, tau}) {
    if (!std::isfinite(v)) throw InvalidInput("ModelScalars: non-finite field");
  }
  if (!(mu > 0.0)) throw InvalidInput("ModelScalars: mu must be positive");
  if (!(h > 0.0 && h <= 1.0)) throw InvalidInput("ModelScalars: h must lie in (0, 1]");
  if (!(f > 0.0)) throw InvalidInput("ModelScalars: field intensity must be positive");
  if (!(sqrt_g > 0.0)) throw InvalidInput("ModelScalars: sqrt_g must be positive");
  if (mu * h > 1.0 * (1.0 + kThresholdSlack)) throw InvalidInput("ModelScalars: mu*h must not exceed 1");
}

std::vector<double> landau_levels(const ModelScalars& s, int n_max) {
  s.validate();
  if (n_max < 0) throw InvalidInput("landau_levels: negative n_max");
  const double gap = s.mu * s.h * s.f;
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) out[n] = 0.5 * ((2.0 * n + 1.0) * gap - s.V);
  return out;
}

long long level_count(const ModelScalars& s) {
  s.validate();
  const double gap = s.mu * s.h * s.f;
  const double ratio = s.fermi() / gap;
  if (ratio < 1.0 - kThresholdSlack) return 0;
  const double half = 0.5 * (ratio - 1.0);
  if (half + 1.0 > static_cast<double>(kLevelCountGuard)) {
    throw TruncationError("level_count: more than " + std::to_string(kLevelCountGuard) + " filled levels");
  }
  const long long n = static_cast<long long>(std::floor(half + kThresholdSlack * (1.0 + ratio))) + 1;
  return n < 0 ? 0 : n;
}

double magnetic_weyl_density(const ModelScalars& s) {
  const auto n = level_count(s);
  return static_cast<double>(n) * s.mu * s.f * s.sqrt_g / (2.0 * kPi * s.h);
}

double weyl_density_diag(const ModelScalars& s) {
  s.validate();
  const double e = s.fermi();
  if (e <= 0.0) return 0.0;
  return e * s.sqrt_g / (4.0 * kPi * s.h * s.h);
}

}  // namespace magweyl::landau
