#include "magweyl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "magweyl/errors.hpp"
#include "magweyl/landau.hpp"
#include "magweyl/parallel.hpp"

namespace magweyl::kernels {

namespace {

// Hermite functions beyond this argument are handled by the scaled recurrence.
constexpr double kPolyPartLimit = 25.0;
constexpr double kEnvelopeMargin = 8.0;

double envelope_radius(int n) { return std::sqrt(2.0 * n + 1.0) + kEnvelopeMargin; }

// Sum over n in [0, n_top] of Y_n(s) Y_n(t).
double hermite_product_sum(double s, double t, int n_top) {
  thread_local std::vector<double> bs, bt;
  const auto len = static_cast<std::size_t>(n_top) + 1;
  if (bs.size() < len) {
    bs.resize(len);
    bt.resize(len);
  }
  std::span<double> qs(bs.data(), len), qt(bt.data(), len);
  double acc = 0.0;
  if (std::max(std::abs(s), std::abs(t)) <= kPolyPartLimit) {
    specfun::hermite_poly_part(s, qs);
    specfun::hermite_poly_part(t, qt);
    for (std::size_t k = 0; k < len; ++k) acc += qs[k] * qt[k];
    return acc * std::exp(-0.5 * (s * s + t * t));
  }
  specfun::hermite_batch_into(s, qs);
  specfun::hermite_batch_into(t, qt);
  for (std::size_t k = 0; k < len; ++k) acc += qs[k] * qt[k];
  return acc;
}

// One stretch of the w-axis on which levels 0..n_top are active.
struct Segment {
  double lo;
  double hi;
  int n_top;
};

// Composite Gauss-Legendre over [lo, hi] of F(w) e^{i c w}. Panels starting
// beyond `tail_start` (where F only decays) end the sum once |F| < 1e-18 on a
// whole panel.
template <class F>
Complex integrate_oscillatory(double lo, double hi, double c, int n_top, double panel_scale, int order,
                              F&& f, double tail_start = std::numeric_limits<double>::infinity()) {
  if (!(hi > lo)) return {0.0, 0.0};
  const double wavenumber = 2.0 * std::sqrt(2.0 * n_top + 1.0) + std::abs(c) + 1.0;
  const double panel = panel_scale * std::min(2.0, 6.0 * kPi / wavenumber);
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel)));
  const double width = (hi - lo) / panels;
  const auto& rule = specfun::cached_rule(specfun::RuleKind::gauss_legendre, order);
  double re = 0.0, im = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = lo + (k + 0.5) * width;
    double pr = 0.0, pi = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double w = mid + 0.5 * width * rule.nodes[i];
      const double fw = f(w);
      peak = std::max(peak, std::abs(fw));
      const double val = rule.weights[i] * fw;
      pr += val * std::cos(c * w);
      pi += val * std::sin(c * w);
    }
    re += pr;
    im += pi;
    if (peak < 1e-18 && mid - 0.5 * width > tail_start) break;
  }
  return {0.5 * width * re, 0.5 * width * im};
}

}  // namespace

void ModelParams::validate() const {
  for (double q : {mu, h, W, v}) {
    if (!std::isfinite(q)) throw InvalidInput("ModelParams: non-finite field");
  }
  if (!(mu > 0.0)) throw InvalidInput("ModelParams: mu must be positive");
  if (!(h > 0.0 && h <= 1.0)) throw InvalidInput("ModelParams: h must lie in (0, 1]");
  if (mu * h > 1.0 + 1e-12) throw InvalidInput("ModelParams: mu*h must not exceed 1");
  if (!(W > 0.0)) throw InvalidInput("ModelParams: W must be positive");
  if (n_max < 0) throw InvalidInput("ModelParams: negative n_max");
}

nlohmann::json to_json(const ModelParams& p) {
  return {{"mu", p.mu}, {"h", p.h}, {"W", p.W}, {"v", p.v}, {"n_max", p.n_max}};
}

ModelParams model_params_from_json(const nlohmann::json& j) {
  ModelParams p;
  try {
    p.mu = j.at("mu").get<double>();
    p.h = j.at("h").get<double>();
    p.W = j.at("W").get<double>();
    p.v = j.value("v", 0.0);
    p.n_max = j.value("n_max", default_n_max(p.mu, p.h, p.W));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("ModelParams JSON: ") + e.what());
  }
  p.validate();
  return p;
}

int default_n_max(double mu, double h, double W) {
  landau::ModelScalars s;
  s.mu = mu;
  s.h = h;
  s.V = W;
  return static_cast<int>(std::max<long long>(1, landau::level_count(s)));
}

Complex gauge_phase(double mu, double h, double v, const Vec2& x, const Vec2& y) {
  const double phase = (mu / h) * (0.5 * (x.y() + y.y()) - v / (mu * mu)) * (x.x() - y.x());
  return std::polar(1.0, phase);
}

ModelKernel::ModelKernel(const ModelParams& p, const KernelOptions& opt) : p_(p), opt_(opt) {
  p_.validate();
  if (opt_.order < 2 || opt_.order > 4096) throw InvalidInput("KernelOptions: order out of range");
  if (!(opt_.panel_scale > 0.0)) throw InvalidInput("KernelOptions: panel_scale must be positive");
  if (!(opt_.tolerance > 0.0)) throw InvalidInput("KernelOptions: tolerance must be positive");
}

Complex ModelKernel::integrate(const Vec2& x, const Vec2& y, double panel_scale) const {
  const double mu = p_.mu, h = p_.h, v = p_.v;
  const double a = std::sqrt(mu / h);
  const double p = 0.5 * a * (x.y() - y.y());
  const double c = a * (x.x() - y.x());
  const double abs_p = std::abs(p);
  const double pref = mu / (2.0 * kPi * h);

  if (v == 0.0) {
    landau::ModelScalars s;
    s.mu = mu;
    s.h = h;
    s.V = p_.W;
    const long long n_levels = landau::level_count(s);
    if (n_levels > p_.n_max) {
      throw TruncationError("model kernel: level " + std::to_string(p_.n_max) + " is active (" +
                            std::to_string(n_levels) + " filled levels)");
    }
    if (n_levels == 0) return {0.0, 0.0};
    const int n_top = static_cast<int>(n_levels) - 1;
    const double upper = envelope_radius(n_top) - abs_p;
    if (upper <= 0.0) return {0.0, 0.0};
    // The integrand is even in w: fold onto [0, upper].
    auto f = [&](double w) { return hermite_product_sum(p - w, -p - w, n_top); };
    const double turning = std::sqrt(2.0 * n_top + 1.0) + abs_p;
    const Complex half = integrate_oscillatory(0.0, upper, c, n_top, panel_scale, opt_.order, f, turning);
    return {2.0 * pref * half.real(), 0.0};
  }

  // v != 0: the substitution w -> -w maps v < 0 onto v > 0 with c -> -c.
  const double cs = v > 0.0 ? c : -c;
  const double av = std::abs(v);
  const double energy = p_.W + v * (x.y() + y.y()) - v * v / (mu * mu);
  auto lower_bound = [&](int n) { return a * ((2.0 * n + 1.0) * mu * h - energy) / (2.0 * av); };
  auto window = [&](int n) { return envelope_radius(n) - abs_p; };

  // Levels are active where lower_bound(n) < window(n). lower_bound - window is
  // convex in n, so the active set is an interval; scan until it is increasing
  // and positive.
  const double slope = a * mu * h / av;
  int n_first = -1, n_last = -1;
  for (int n = 0;; ++n) {
    if (n > landau::kLevelCountGuard) throw TruncationError("model kernel: level scan exceeded guard");
    const double r = window(n);
    const bool active = r > 0.0 && lower_bound(n) < r;
    if (active) {
      if (n_first < 0) n_first = n;
      n_last = n;
    } else if (lower_bound(n) >= r && slope >= envelope_radius(n + 1) - envelope_radius(n)) {
      break;
    }
  }
  if (n_last >= p_.n_max) {
    throw TruncationError("model kernel: level " + std::to_string(n_last) + " is active but n_max = " +
                          std::to_string(p_.n_max));
  }
  if (n_first < 0) return {0.0, 0.0};

  const double r_top = window(n_last);
  std::vector<Segment> segments;
  for (int n = 0; n <= n_last; ++n) {
    const double lo = std::max(lower_bound(n), -r_top);
    const double hi = n < n_last ? std::min(lower_bound(n + 1), r_top) : r_top;
    if (hi > lo) segments.push_back({lo, hi, n});
  }
  Complex acc{0.0, 0.0};
  for (const auto& seg : segments) {
    auto f = [&](double w) { return hermite_product_sum(p - w, -p - w, seg.n_top); };
    acc += integrate_oscillatory(seg.lo, seg.hi, cs, seg.n_top, panel_scale, opt_.order, f);
  }
  return pref * acc;
}

Complex ModelKernel::stripped(const Vec2& x, const Vec2& y) const {
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("model kernel: non-finite point");
  const Complex coarse = integrate(x, y, opt_.panel_scale);
  if (!opt_.verify) return coarse;
  const Complex fine = integrate(x, y, 0.5 * opt_.panel_scale);
  const double scale = std::max(std::abs(fine), 1e-3 * p_.mu / (2.0 * kPi * p_.h));
  if (std::abs(fine - coarse) > opt_.tolerance * scale) {
    std::ostringstream msg;
    msg << "model kernel: panel refinement changed the value by " << std::abs(fine - coarse) / scale
        << " (relative)";
    throw AccuracyError(msg.str());
  }
  return fine;
}

Complex ModelKernel::operator()(const Vec2& x, const Vec2& y) const {
  return gauge_phase(p_.mu, p_.h, p_.v, x, y) * stripped(x, y);
}

double ModelKernel::diagonal(const Vec2& x) const { return stripped(x, x).real(); }

Complex model_kernel(const ModelParams& p, const Vec2& x, const Vec2& y) { return ModelKernel(p)(x, y); }

Complex landau_projector_kernel(int n, double mu, double h, const Vec2& x, const Vec2& y) {
  if (n < 0 || n > specfun::kLaguerreMax) throw InvalidInput("landau_projector_kernel: n out of range");
  if (!(mu > 0.0) || !(h > 0.0)) throw InvalidInput("landau_projector_kernel: mu and h must be positive");
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("landau_projector_kernel: non-finite point");
  const double r2 = mu * (x - y).squaredNorm() / h;
  const double radial = mu / (2.0 * kPi * h) * specfun::laguerre_poly(n, 0.5 * r2) * std::exp(-0.25 * r2);
  return radial * gauge_phase(mu, h, 0.0, x, y);
}

double weyl_kernel(double V, double h, double tau, const Mat2& metric, const Vec2& x, const Vec2& y) {
  if (!std::isfinite(V) || !std::isfinite(tau) || !(h > 0.0)) throw InvalidInput("weyl_kernel: bad scalars");
  if (!metric.allFinite() || std::abs(metric(0, 1) - metric(1, 0)) > 1e-12 * metric.norm()) {
    throw InvalidInput("weyl_kernel: metric must be symmetric");
  }
  Eigen::LLT<Mat2> llt(metric);
  if (llt.info() != Eigen::Success || !(metric.determinant() > 0.0)) {
    throw InvalidInput("weyl_kernel: metric must be positive definite");
  }
  const double energy = V + 2.0 * tau;
  if (energy <= 0.0) return 0.0;
  const double r = std::sqrt(energy);
  const double sqrt_g = std::sqrt(metric.determinant());
  const Vec2 z = x - y;
  const double s = std::sqrt(std::max(0.0, z.dot(metric * z)));
  if (s < 1e-12) return energy * sqrt_g / (4.0 * kPi * h * h);
  return sqrt_g * r * specfun::bessel_j1(r * s / h) / (2.0 * kPi * h * s);
}

std::string_view to_string(PhaseConvention c) {
  switch (c) {
    case PhaseConvention::landau_gauge:
      return "landau_gauge";
    case PhaseConvention::stripped:
      return "stripped";
  }
  return "?";
}

PhaseConvention phase_convention_from_string(std::string_view s) {
  if (s == "landau_gauge") return PhaseConvention::landau_gauge;
  if (s == "stripped") return PhaseConvention::stripped;
  throw InvalidInput("unknown phase convention: " + std::string(s));
}

void SpectralKernelField::check_invariants() const {
  if (values.rows() != static_cast<Eigen::Index>(points_x.size()) ||
      values.cols() != static_cast<Eigen::Index>(points_y.size())) {
    throw InvalidInput("SpectralKernelField: value matrix does not match point lists");
  }
  auto key = [](const Vec2& q) { return std::make_pair(q.x(), q.y()); };
  std::map<std::pair<double, double>, Eigen::Index> in_x, in_y;
  for (std::size_t i = 0; i < points_x.size(); ++i) in_x.emplace(key(points_x[i]), i);
  for (std::size_t j = 0; j < points_y.size(); ++j) in_y.emplace(key(points_y[j]), j);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const Complex e = values(i, j);
      if (points_x[i] == points_y[j]) {
        if (std::abs(e.imag()) > 1e-10 || e.real() < -1e-10) {
          throw SymmetryError("SpectralKernelField: diagonal value is not real and nonnegative");
        }
      }
      const auto ii = in_x.find(key(points_y[j]));
      const auto jj = in_y.find(key(points_x[i]));
      if (ii == in_x.end() || jj == in_y.end()) continue;
      const Complex f = values(ii->second, jj->second);
      const double scale = std::max({std::abs(e), std::abs(f), 1e-300});
      if (std::abs(e - std::conj(f)) > 1e-10 * scale && std::abs(e - std::conj(f)) > 1e-14) {
        throw SymmetryError("SpectralKernelField: e(x,y) and conj e(y,x) differ");
      }
    }
  }
}

void SpectralKernelField::write_csv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  os << "x1,x2,y1,y2,re,im\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const auto& x = points_x[i];
      const auto& y = points_y[j];
      os << x.x() << ',' << x.y() << ',' << y.x() << ',' << y.y() << ',' << values(i, j).real() << ','
         << values(i, j).imag() << '\n';
    }
  }
  os.precision(old_precision);
}

nlohmann::json SpectralKernelField::to_json() const {
  nlohmann::json j;
  j["params"] = kernels::to_json(params);
  j["gauge"] = {{"phase_convention", std::string(to_string(gauge.convention))},
                {"center", {gauge.center.x(), gauge.center.y()}}};
  auto points = [](const std::vector<Vec2>& pts) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& q : pts) a.push_back({q.x(), q.y()});
    return a;
  };
  j["points_x"] = points(points_x);
  j["points_y"] = points(points_y);
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    nlohmann::json rr = nlohmann::json::array(), ri = nlohmann::json::array();
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      rr.push_back(values(i, k).real());
      ri.push_back(values(i, k).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  j["values_re"] = std::move(re);
  j["values_im"] = std::move(im);
  return j;
}

SpectralKernelField read_field_csv(std::istream& is, const ModelParams& params) {
  struct Row {
    Vec2 x, y;
    Complex e;
  };
  std::vector<Row> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("x1", 0) == 0) continue;
    }
    std::istringstream ls(line);
    double v[6];
    char sep = ',';
    for (int k = 0; k < 6; ++k) {
      if (k > 0 && !(ls >> sep)) throw InvalidInput("field CSV: short row: " + line);
      if (sep != ',' || !(ls >> v[k])) throw InvalidInput("field CSV: malformed row: " + line);
    }
    rows.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3]), Complex(v[4], v[5])});
  }
  SpectralKernelField field;
  field.params = params;
  auto key = [](const Vec2& q) { return std::make_pair(q.x(), q.y()); };
  std::map<std::pair<double, double>, std::size_t> ix, iy;
  for (const auto& r : rows) {
    if (ix.emplace(key(r.x), field.points_x.size()).second) field.points_x.push_back(r.x);
    if (iy.emplace(key(r.y), field.points_y.size()).second) field.points_y.push_back(r.y);
  }
  const auto nx = static_cast<Eigen::Index>(field.points_x.size());
  const auto ny = static_cast<Eigen::Index>(field.points_y.size());
  if (static_cast<Eigen::Index>(rows.size()) != nx * ny) {
    throw InvalidInput("field CSV: rows do not form a full product of points");
  }
  field.values = Eigen::MatrixXcd::Zero(nx, ny);
  for (const auto& r : rows) field.values(ix[key(r.x)], iy[key(r.y)]) = r.e;
  return field;
}

SpectralKernelField field_from_json(const nlohmann::json& j) {
  SpectralKernelField f;
  try {
    f.params = model_params_from_json(j.at("params"));
    f.gauge.convention = phase_convention_from_string(j.at("gauge").at("phase_convention").get<std::string>());
    const auto& c = j.at("gauge").at("center");
    f.gauge.center = Vec2(c.at(0).get<double>(), c.at(1).get<double>());
    for (const auto& q : j.at("points_x")) f.points_x.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
    for (const auto& q : j.at("points_y")) f.points_y.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
    const auto& re = j.at("values_re");
    const auto& im = j.at("values_im");
    const auto nx = static_cast<Eigen::Index>(f.points_x.size());
    const auto ny = static_cast<Eigen::Index>(f.points_y.size());
    if (static_cast<Eigen::Index>(re.size()) != nx || static_cast<Eigen::Index>(im.size()) != nx) {
      throw InvalidInput("field JSON: value rows do not match points_x");
    }
    f.values.resize(nx, ny);
    for (Eigen::Index i = 0; i < nx; ++i) {
      if (static_cast<Eigen::Index>(re[i].size()) != ny || static_cast<Eigen::Index>(im[i].size()) != ny) {
        throw InvalidInput("field JSON: value columns do not match points_y");
      }
      for (Eigen::Index k = 0; k < ny; ++k) f.values(i, k) = {re[i][k].get<double>(), im[i][k].get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("field JSON: ") + e.what());
  }
  return f;
}

SpectralKernelField kernel_grid(const ModelParams& p, const std::vector<Vec2>& axis, const KernelOptions& opt) {
  if (axis.empty()) throw InvalidInput("kernel_grid: empty axis");
  const ModelKernel kernel(p, opt);
  SpectralKernelField field;
  field.params = p;
  field.points_x = axis;
  field.points_y = axis;
  const auto n = static_cast<Eigen::Index>(axis.size());
  field.values.resize(n, n);
  parallel_for(axis.size(), [&](std::size_t i) {
    for (Eigen::Index j = 0; j < n; ++j) field.values(static_cast<Eigen::Index>(i), j) = kernel(axis[i], axis[j]);
  });
  field.check_invariants();
  return field;
}

double local_count(const ModelParams& p, const PlaneFn& psi, const specfun::QuadratureRule& quad,
                   const Box& window) {
  if (quad.kind != specfun::RuleKind::gauss_legendre) {
    throw InvalidInput("local_count: a gauss_legendre rule is required");
  }
  if (!(window.hi.x() > window.lo.x()) || !(window.hi.y() > window.lo.y())) {
    throw InvalidInput("local_count: empty window");
  }
  const ModelKernel kernel(p);
  auto tensor = [&](const specfun::QuadratureRule& rule) {
    const double c1 = 0.5 * (window.lo.x() + window.hi.x()), r1 = 0.5 * (window.hi.x() - window.lo.x());
    const double c2 = 0.5 * (window.lo.y() + window.hi.y()), r2 = 0.5 * (window.hi.y() - window.lo.y());
    double total = 0.0;
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const double x2 = c2 + r2 * rule.nodes[j];
      double row = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) {
        row += rule.weights[i] * psi(Vec2(c1 + r1 * rule.nodes[i], x2));
      }
      // The diagonal depends on x2 only.
      if (row != 0.0) total += rule.weights[j] * row * kernel.diagonal(Vec2(0.0, x2));
    }
    return total * r1 * r2;
  };
  const double coarse = tensor(quad);
  const double fine = tensor(specfun::cached_rule(quad.kind, std::min(2 * quad.order, 4096)));
  if (std::abs(fine - coarse) > 1e-6 * std::abs(fine) && std::abs(fine - coarse) > 1e-300) {
    std::ostringstream msg;
    msg << "local_count: order doubling changed J from " << coarse << " to " << fine;
    throw AccuracyError(msg.str());
  }
  return fine;
}

}  // namespace magweyl::kernels
