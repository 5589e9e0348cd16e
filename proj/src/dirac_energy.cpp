#include "magweyl/dirac_energy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <string>

#include "magweyl/errors.hpp"
#include "magweyl/landau.hpp"
#include "magweyl/parallel.hpp"

namespace magweyl::dirac {

namespace {

using specfun::QuadratureRule;
using specfun::RuleKind;

template <class T>
T pairwise_range(const T* v, std::size_t n) {
  if (n == 0) return T{};
  if (n <= 8) {
    T s{};
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_range(v, half) + pairwise_range(v + half, n - half);
}

// Angular interval of the circle |y - x| = r that lies inside the disk
// (center, radius). Returns false when the intersection is empty.
bool disk_arc(const Vec2& x, double r, const Vec2& center, double radius, double& theta0, double& half_width) {
  const Vec2 d = center - x;
  const double dist = d.norm();
  theta0 = dist > 0.0 ? std::atan2(d.y(), d.x()) : 0.0;
  if (r + dist <= radius) {
    half_width = kPi;
    return true;
  }
  if (r >= dist + radius || r <= dist - radius) return false;
  const double cosine = (r * r + dist * dist - radius * radius) / (2.0 * r * dist);
  half_width = std::acos(std::clamp(cosine, -1.0, 1.0));
  return half_width > 0.0;
}

// Outer tensor nodes over a box, dropping nodes where |psi| is negligible.
struct OuterNode {
  Vec2 x;
  double weight;  // rule weight times psi_2(x)
};

std::vector<OuterNode> outer_nodes(const PlaneFn& psi, const Box& box, const QuadratureRule& rule) {
  const double c1 = 0.5 * (box.lo.x() + box.hi.x()), r1 = 0.5 * (box.hi.x() - box.lo.x());
  const double c2 = 0.5 * (box.lo.y() + box.hi.y()), r2 = 0.5 * (box.hi.y() - box.lo.y());
  std::vector<OuterNode> nodes;
  std::vector<double> values;
  double peak = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const Vec2 x(c1 + r1 * rule.nodes[i], c2 + r2 * rule.nodes[j]);
      const double v = psi(x);
      peak = std::max(peak, std::abs(v));
      nodes.push_back({x, rule.weights[i] * rule.weights[j] * r1 * r2 * v});
      values.push_back(v);
    }
  }
  std::vector<OuterNode> kept;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (std::abs(values[k]) > 1e-15 * peak) kept.push_back(nodes[k]);
  }
  return kept;
}

// Radial nodes on [0, r_max]. Tanh-sinh covers the innermost piece
// [0, min(gamma, panel width)] where the r^{1-kappa} factor is singular; the
// rest of the gamma-patch and the far zone use Gauss-Legendre panels.
struct RadialNode {
  double r;
  double weight;
};

void append_panels(std::vector<RadialNode>& nodes, double lo, double hi, const QuadratureSpec& q) {
  if (!(hi > lo)) return;
  const auto& gl = specfun::cached_rule(RuleKind::gauss_legendre, q.far_order);
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / q.far_panel_width)));
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (std::size_t i = 0; i < gl.size(); ++i) {
      nodes.push_back({mid + 0.5 * width * gl.nodes[i], 0.5 * width * gl.weights[i]});
    }
  }
}

std::vector<RadialNode> radial_nodes(const QuadratureSpec& q, double r_max) {
  std::vector<RadialNode> nodes;
  if (!(r_max > 0.0)) return nodes;
  const double near = std::min(q.split_radius, r_max);
  const double core = std::min(near, q.far_panel_width);
  for (std::size_t k = 0; k < q.radial_rule.size(); ++k) {
    nodes.push_back({core * q.radial_rule.nodes[k], core * q.radial_rule.weights[k]});
  }
  append_panels(nodes, core, near, q);
  append_panels(nodes, near, r_max, q);
  return nodes;
}

struct PassResult {
  Complex value;
  std::size_t evaluations;
};

PassResult singular_pass(const KernelFn& e, const SingularWeight& w, const CutoffPair& c, const QuadratureSpec& q) {
  const auto outer = outer_nodes(c.psi2, c.support_box2(), q.outer_rule);
  const auto& ang = specfun::cached_rule(RuleKind::gauss_legendre, q.angular_order);
  std::vector<Complex> contrib(outer.size());
  std::atomic<std::size_t> evaluations{0};
  // Arcs longer than a circle of radius R/4 get proportionally more points.
  const double arc_unit = 0.5 * kPi * c.support_radius;
  auto arc_rule = [&](double arc_length) -> const QuadratureRule& {
    const double ratio = arc_length / arc_unit;
    if (ratio <= 1.0) return ang;
    const int order = std::min(4096, 8 * static_cast<int>(std::ceil(q.angular_order * ratio / 8.0)));
    return specfun::cached_rule(RuleKind::gauss_legendre, order);
  };
  parallel_for(outer.size(), [&](std::size_t k) {
    const Vec2 x = outer[k].x;
    const double reach = (c.center1 - x).norm() + c.support_radius;
    const auto radial = radial_nodes(q, std::min(reach, q.kernel_range));
    std::vector<Complex> ring(radial.size());
    std::size_t count = 0;
    // Below this radius the angular integral is r^{-kappa} times its r -> 0
    // limit up to a relative O(r) error; it is computed once.
    const double r_limit = 1e-6 * q.split_radius;
    std::optional<Complex> at_zero;
    for (std::size_t i = 0; i < radial.size(); ++i) {
      const double r = radial[i].r;
      double theta0 = 0.0, half = 0.0;
      if (r <= 0.0 || !disk_arc(x, r, c.center1, c.support_radius, theta0, half)) continue;
      if (r < r_limit && half == kPi) {
        if (!at_zero) {
          const Complex diag = e(x, x) * e(x, x);
          double mean = 0.0;
          for (std::size_t j = 0; j < ang.size(); ++j) {
            const double th = kPi * ang.nodes[j];
            mean += ang.weights[j] * w.omega(x, x, -Vec2(std::cos(th), std::sin(th)));
          }
          at_zero = kPi * mean * c.psi1(x) * diag;
          count += 2;
        }
        ring[i] = radial[i].weight * std::pow(r, 1.0 - w.kappa) * *at_zero;
        continue;
      }
      Complex s{0.0, 0.0};
      const auto& arc = arc_rule(2.0 * half * r);
      for (std::size_t j = 0; j < arc.size(); ++j) {
        const double th = theta0 + half * arc.nodes[j];
        const Vec2 u(std::cos(th), std::sin(th));
        const Vec2 y = x + r * u;
        const double p1 = c.psi1(y);
        if (p1 == 0.0) continue;
        const double om = w.omega(x, y, -r * u);
        s += arc.weights[j] * om * p1 * e(x, y) * e(y, x);
        count += 2;
      }
      ring[i] = radial[i].weight * r * half * s;
    }
    contrib[k] = outer[k].weight * pairwise_sum(ring);
    evaluations += count;
  });
  return {pairwise_sum(contrib), evaluations.load()};
}

PassResult plain_pass(const KernelFn& e, const SingularWeight& w, const CutoffPair& c, const QuadratureSpec& q) {
  const auto outer = outer_nodes(c.psi2, c.support_box2(), q.outer_rule);
  const auto inner = outer_nodes(c.psi1, c.support_box1(), q.outer_rule);
  std::vector<Complex> contrib(outer.size());
  parallel_for(outer.size(), [&](std::size_t k) {
    const Vec2 x = outer[k].x;
    std::vector<Complex> row(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) {
      const Vec2& y = inner[i].x;
      row[i] = inner[i].weight * w.omega(x, y, x - y) * e(x, y) * e(y, x);
    }
    contrib[k] = outer[k].weight * pairwise_sum(row);
  });
  return {pairwise_sum(contrib), 2 * outer.size() * inner.size()};
}

DiracResult finish(const Complex& coarse, std::size_t evals, const QuadratureSpec& q,
                   const std::function<Complex(const QuadratureSpec&)>& rerun) {
  DiracResult out;
  out.value = coarse.real();
  out.imag_residual = coarse.imag();
  out.kernel_evaluations = evals;
  if (std::abs(coarse.imag()) > q.symmetry_tolerance * std::abs(coarse.real()) &&
      std::abs(coarse.imag()) > 1e-300) {
    std::ostringstream msg;
    msg << "dirac energy: imaginary residual " << coarse.imag() << " for I = " << coarse.real();
    throw SymmetryError(msg.str());
  }
  if (q.check_convergence) {
    const Complex fine = rerun(q.refined());
    out.refined_value = fine.real();
    out.relative_change = std::abs(fine.real() - coarse.real()) / std::max(std::abs(fine.real()), 1e-300);
    if (fine.real() != coarse.real() && out.relative_change > q.convergence_tolerance) {
      std::ostringstream msg;
      msg << "dirac energy: refinement changed I by " << out.relative_change << " (relative)";
      throw AccuracyError(msg.str());
    }
  }
  return out;
}

void require_weight(const SingularWeight& w) {
  if (!w.omega) throw InvalidInput("SingularWeight: omega not set");
  if (!w.plain && !(w.kappa > 0.0 && w.kappa < 2.0)) throw InvalidInput("SingularWeight: kappa must lie in (0, 2)");
}

}  // namespace

double pairwise_sum(const std::vector<double>& v) { return pairwise_range(v.data(), v.size()); }
Complex pairwise_sum(const std::vector<Complex>& v) { return pairwise_range(v.data(), v.size()); }

SingularWeight SingularWeight::isotropic(double kappa, double coeff) {
  if (!(kappa > 0.0 && kappa < 2.0)) throw InvalidInput("isotropic weight: kappa must lie in (0, 2)");
  if (!std::isfinite(coeff)) throw InvalidInput("isotropic weight: non-finite coefficient");
  SingularWeight w;
  w.kappa = kappa;
  w.omega = [kappa, coeff](const Vec2&, const Vec2&, const Vec2& z) { return coeff * std::pow(z.norm(), -kappa); };
  w.isotropic_coeff = coeff;
  w.homogeneity_checked = true;
  return w;
}

SingularWeight SingularWeight::constant(double value) {
  if (!std::isfinite(value)) throw InvalidInput("constant weight: non-finite value");
  SingularWeight w;
  w.kappa = 0.0;
  w.omega = [value](const Vec2&, const Vec2&, const Vec2&) { return value; };
  w.plain = true;
  w.homogeneity_checked = true;
  return w;
}

SingularWeight SingularWeight::general(double kappa, OmegaFn omega) {
  if (!(kappa > 0.0 && kappa < 2.0)) throw InvalidInput("weight: kappa must lie in (0, 2)");
  if (!omega) throw InvalidInput("weight: omega not set");
  const Vec2 xs[] = {Vec2(0.0, 0.0), Vec2(0.3, -0.7), Vec2(-1.1, 0.4)};
  const Vec2 zs[] = {Vec2(1.0, 0.0), Vec2(0.2, 0.5), Vec2(-0.4, -0.9)};
  for (const auto& x : xs) {
    for (const auto& z : zs) {
      const Vec2 y = x - z;
      const double base = omega(x, y, z);
      for (double t : {0.5, 2.0, 4.0}) {
        const double scaled = omega(x, y, t * z);
        const double expect = std::pow(t, -kappa) * base;
        if (!(std::abs(scaled - expect) <= 1e-8 * std::max(std::abs(expect), 1e-300))) {
          throw InvalidInput("weight: Omega is not homogeneous of degree -kappa in its third argument");
        }
      }
    }
  }
  SingularWeight w;
  w.kappa = kappa;
  w.omega = std::move(omega);
  w.homogeneity_checked = true;
  return w;
}

Box CutoffPair::support_box1() const {
  if (box1) return *box1;
  const Vec2 r(support_radius, support_radius);
  return {center1 - r, center1 + r};
}

Box CutoffPair::support_box2() const {
  if (box2) return *box2;
  const Vec2 r(support_radius, support_radius);
  return {center2 - r, center2 + r};
}

void CutoffPair::validate() const {
  if (!psi1 || !psi2) throw InvalidInput("CutoffPair: cut-off function not set");
  if (!(support_radius > 0.0) || !std::isfinite(support_radius)) {
    throw InvalidInput("CutoffPair: support radius must be positive");
  }
  const int ring = 16;
  for (int k = 0; k < ring; ++k) {
    const double th = 2.0 * kPi * (k + 0.5) / ring;
    const Vec2 u(std::cos(th), std::sin(th));
    for (double f : {0.0, 0.25, 0.5, 0.75}) {
      for (const auto& [psi, center] : {std::pair{&psi1, center1}, std::pair{&psi2, center2}}) {
        const double v = (*psi)(center + f * support_radius * u);
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("CutoffPair: cut-off value outside [0, 1]");
      }
    }
    for (const auto& [psi, center] : {std::pair{&psi1, center1}, std::pair{&psi2, center2}}) {
      if ((*psi)(center + 1.01 * support_radius * u) != 0.0) {
        throw InvalidInput("CutoffPair: cut-off does not vanish outside its support radius");
      }
    }
  }
}

CutoffPair CutoffPair::gaussian(double sigma, const Vec2& c1, const Vec2& c2) {
  if (!(sigma > 0.0)) throw InvalidInput("gaussian cut-off: sigma must be positive");
  const double radius = 8.0 * sigma;
  auto bump = [sigma, radius](const Vec2& c) {
    return [c, sigma, radius](const Vec2& x) {
      const double d2 = (x - c).squaredNorm();
      return d2 <= radius * radius ? std::exp(-d2 / (2.0 * sigma * sigma)) : 0.0;
    };
  };
  CutoffPair out;
  out.psi1 = bump(c1);
  out.psi2 = bump(c2);
  out.support_radius = radius;
  out.center1 = c1;
  out.center2 = c2;
  return out;
}

CutoffPair CutoffPair::unit_square() {
  auto ind = [](const Vec2& x) {
    return x.x() >= 0.0 && x.x() <= 1.0 && x.y() >= 0.0 && x.y() <= 1.0 ? 1.0 : 0.0;
  };
  CutoffPair out;
  out.psi1 = ind;
  out.psi2 = ind;
  out.support_radius = std::sqrt(0.5);
  out.center1 = Vec2(0.5, 0.5);
  out.center2 = Vec2(0.5, 0.5);
  out.box1 = Box{Vec2(0, 0), Vec2(1, 1)};
  out.box2 = Box{Vec2(0, 0), Vec2(1, 1)};
  return out;
}

void QuadratureSpec::validate(const CutoffPair& c) const {
  if (outer_rule.kind != RuleKind::gauss_legendre || outer_rule.size() == 0) {
    throw InvalidInput("QuadratureSpec: outer rule must be gauss_legendre");
  }
  if (radial_rule.kind != RuleKind::tanh_sinh || radial_rule.size() == 0) {
    throw InvalidInput("QuadratureSpec: radial rule must be tanh_sinh");
  }
  if (!(split_radius > 0.0 && split_radius < c.support_radius)) {
    throw InvalidInput("QuadratureSpec: split radius must lie in (0, support radius)");
  }
  if (angular_order < 2 || angular_order > 4096 || far_order < 2 || far_order > 4096) {
    throw InvalidInput("QuadratureSpec: angular/far order out of range");
  }
  if (!(far_panel_width > 0.0) || !(kernel_range > 0.0)) {
    throw InvalidInput("QuadratureSpec: panel width and kernel range must be positive");
  }
  if (!(convergence_tolerance > 0.0) || !(symmetry_tolerance > 0.0)) {
    throw InvalidInput("QuadratureSpec: tolerances must be positive");
  }
}

QuadratureSpec QuadratureSpec::refined() const {
  QuadratureSpec r = *this;
  r.radial_rule = specfun::cached_rule(RuleKind::tanh_sinh, std::min(2 * radial_rule.order, 4096));
  r.angular_order = std::min(2 * angular_order, 4096);
  r.far_panel_width = 0.5 * far_panel_width;
  r.check_convergence = false;
  return r;
}

QuadratureSpec default_quadrature(const CutoffPair& c, double core_length, double panel_width) {
  if (!(core_length > 0.0) || !(panel_width > 0.0)) throw InvalidInput("default_quadrature: lengths must be positive");
  QuadratureSpec q;
  q.outer_rule = specfun::cached_rule(RuleKind::gauss_legendre, 32);
  q.radial_rule = specfun::cached_rule(RuleKind::tanh_sinh, 48);
  q.split_radius = std::min(c.support_radius / 4.0, 8.0 * core_length);
  q.angular_order = 24;
  q.far_panel_width = panel_width;
  q.far_order = 16;
  return q;
}

QuadratureSpec model_quadrature(const kernels::ModelParams& p, const CutoffPair& c) {
  p.validate();
  const double ell = std::sqrt(p.h / p.mu);
  const double levels = static_cast<double>(kernels::default_n_max(p.mu, p.h, p.W));
  const double spread = std::sqrt(2.0 * levels + 1.0);
  auto q = default_quadrature(c, ell, 2.0 * ell / spread);
  q.kernel_range = (2.0 * spread + 8.0) * ell;
  return q;
}

QuadratureSpec weyl_quadrature(double V, double h, double tau, const CutoffPair& c) {
  const double energy = V + 2.0 * tau;
  if (!(energy > 0.0) || !(h > 0.0)) throw InvalidInput("weyl_quadrature: need V + 2 tau > 0 and h > 0");
  const double ell = h / std::sqrt(energy);
  return default_quadrature(c, ell, 2.0 * ell);
}

DiracResult dirac_energy_detailed(const KernelFn& e, const SingularWeight& w, const CutoffPair& c,
                                  const QuadratureSpec& q) {
  if (!e) throw InvalidInput("dirac_energy: kernel callback not set");
  require_weight(w);
  c.validate();
  q.validate(c);
  auto pass = [&](const QuadratureSpec& spec) {
    return w.plain ? plain_pass(e, w, c, spec) : singular_pass(e, w, c, spec);
  };
  const auto coarse = pass(q);
  if (w.plain) {
    // The tensor rule has no radial/angular orders to refine.
    auto flat = q;
    flat.check_convergence = false;
    return finish(coarse.value, coarse.evaluations, flat, {});
  }
  return finish(coarse.value, coarse.evaluations, q, [&](const QuadratureSpec& s) { return pass(s).value; });
}

double dirac_energy(const KernelFn& e, const SingularWeight& w, const CutoffPair& c, const QuadratureSpec& q) {
  return dirac_energy_detailed(e, w, c, q).value;
}

double dirac_energy_field(const kernels::SpectralKernelField& f, const std::vector<double>& weights,
                          const SingularWeight& w, const CutoffPair& c) {
  require_weight(w);
  c.validate();
  const auto n = f.points_x.size();
  if (f.points_y.size() != n || weights.size() != n ||
      f.values.rows() != static_cast<Eigen::Index>(n) || f.values.cols() != static_cast<Eigen::Index>(n)) {
    throw InvalidInput("dirac_energy_field: field must be square over one point list with matching weights");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (f.points_x[i] != f.points_y[i]) throw InvalidInput("dirac_energy_field: points_x and points_y differ");
  }
  const auto& ang = specfun::cached_rule(RuleKind::gauss_legendre, 32);
  std::vector<Complex> rows(n);
  parallel_for(n, [&](std::size_t i) {
    const Vec2& x = f.points_x[i];
    const double p2 = c.psi2(x);
    if (p2 == 0.0) return;
    std::vector<Complex> row(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec2& y = f.points_x[j];
      row[j] = weights[j] * w.omega(x, y, x - y) * c.psi1(y) *
               f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               f.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
    // Own cell: disk of area weights[i] around x.
    const double rho = std::sqrt(weights[i] / kPi);
    double mean = 0.0;
    for (std::size_t k = 0; k < ang.size(); ++k) {
      const double th = kPi * (ang.nodes[k] + 1.0);
      const Vec2 u(std::cos(th), std::sin(th));
      mean += 0.5 * ang.weights[k] * w.omega(x, x - u, u);
    }
    const double radial = w.plain ? weights[i] : 2.0 * kPi * std::pow(rho, 2.0 - w.kappa) / (2.0 - w.kappa);
    const double diag = std::norm(f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    row[i] = mean * radial * diag * c.psi1(x);
    rows[i] = weights[i] * p2 * pairwise_sum(row);
  });
  const Complex total = pairwise_sum(rows);
  if (std::abs(total.imag()) > 1e-9 * std::abs(total.real()) && std::abs(total.imag()) > 1e-300) {
    throw SymmetryError("dirac_energy_field: imaginary residual above tolerance");
  }
  return total.real();
}

double model_kernel_sq(const kernels::ModelParams& p, double s) {
  p.validate();
  if (p.v != 0.0) throw InvalidInput("model_kernel_sq: radial form needs v = 0");
  const int levels = kernels::default_n_max(p.mu, p.h, p.W);
  landau::ModelScalars sc;
  sc.mu = p.mu;
  sc.h = p.h;
  sc.V = p.W;
  if (landau::level_count(sc) == 0) return 0.0;
  const double r2 = p.mu * s * s / p.h;
  double sum = 0.0;
  for (int n = 0; n < levels; ++n) sum += specfun::laguerre_poly(n, 0.5 * r2);
  const double e = p.mu / (2.0 * kPi * p.h) * sum * std::exp(-0.25 * r2);
  return e * e;
}

double weyl_kernel_sq(double V, double h, double tau, double s) {
  const double e = kernels::weyl_kernel(V, h, tau, Mat2::Identity(), Vec2(0, 0), Vec2(s, 0));
  return e * e;
}

double pair_correlation(const CutoffPair& c, double s, int outer_order, int angular_order) {
  const auto& outer_rule = specfun::cached_rule(RuleKind::gauss_legendre, outer_order);
  const auto& ang = specfun::cached_rule(RuleKind::gauss_legendre, angular_order);
  const auto outer = outer_nodes(c.psi2, c.support_box2(), outer_rule);
  std::vector<double> terms(outer.size());
  for (std::size_t k = 0; k < outer.size(); ++k) {
    const Vec2 x = outer[k].x;
    double theta0 = 0.0, half = 0.0;
    if (s <= 0.0) {
      terms[k] = outer[k].weight * 2.0 * kPi * c.psi1(x);
      continue;
    }
    if (!disk_arc(x, s, c.center1, c.support_radius, theta0, half)) continue;
    double acc = 0.0;
    for (std::size_t j = 0; j < ang.size(); ++j) {
      const double th = theta0 + half * ang.nodes[j];
      acc += ang.weights[j] * c.psi1(x + s * Vec2(std::cos(th), std::sin(th)));
    }
    terms[k] = outer[k].weight * half * acc;
  }
  return pairwise_sum(terms);
}

DiracResult radial_dirac_energy_detailed(const RadialFn& K, const SingularWeight& w, const CutoffPair& c,
                                         const QuadratureSpec& q) {
  if (!K) throw InvalidInput("radial_dirac_energy: kernel not set");
  require_weight(w);
  if (!w.isotropic_coeff && !w.plain) throw InvalidInput("radial_dirac_energy: weight must be isotropic");
  c.validate();
  q.validate(c);
  const double coeff = w.plain ? w.omega(Vec2(0, 0), Vec2(1, 0), Vec2(-1, 0)) : *w.isotropic_coeff;
  const double kappa = w.plain ? 0.0 : w.kappa;
  const double reach = (c.center1 - c.center2).norm() + 2.0 * c.support_radius;
  auto pass = [&](const QuadratureSpec& spec) {
    const auto nodes = radial_nodes(spec, std::min(reach, spec.kernel_range));
    std::vector<double> terms(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) {
      const double s = nodes[i].r;
      if (s <= 0.0) return;
      const double k = K(s);
      if (k == 0.0) return;
      terms[i] = nodes[i].weight * k * std::pow(s, 1.0 - kappa) *
                 pair_correlation(c, s, spec.outer_rule.order + 16, 2 * spec.angular_order);
    });
    return Complex(coeff * pairwise_sum(terms), 0.0);
  };
  const Complex coarse = pass(q);
  return finish(coarse, 0, q, pass);
}

double radial_dirac_energy(const RadialFn& K, const SingularWeight& w, const CutoffPair& c,
                           const QuadratureSpec& q) {
  return radial_dirac_energy_detailed(K, w, c, q).value;
}

double radial_dirac_energy(const kernels::ModelParams& p, const SingularWeight& w, const CutoffPair& c,
                           const QuadratureSpec& q) {
  p.validate();
  if (p.v != 0.0) throw InvalidInput("radial_dirac_energy: needs v = 0");
  return radial_dirac_energy([&p](double s) { return model_kernel_sq(p, s); }, w, c, q);
}

double weyl_reference(double V, double h, double tau, const Mat2& metric, const SingularWeight& w,
                      const CutoffPair& c, const QuadratureSpec& q) {
  // Validates the metric once up front.
  (void)kernels::weyl_kernel(V, h, tau, metric, Vec2(0, 0), Vec2(0, 0));
  KernelFn e = [=](const Vec2& x, const Vec2& y) { return Complex(kernels::weyl_kernel(V, h, tau, metric, x, y), 0.0); };
  return dirac_energy(e, w, c, q);
}

double radial_weyl_reference(double V, double h, double tau, const SingularWeight& w, const CutoffPair& c,
                             const QuadratureSpec& q) {
  return radial_dirac_energy([=](double s) { return weyl_kernel_sq(V, h, tau, s); }, w, c, q);
}

}  // namespace magweyl::dirac
