#pragma once

#include <complex>
#include <functional>
#include <numbers>

#include <Eigen/Core>

namespace magweyl {

using Complex = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = std::numbers::pi;

// Kernel of a two-point operator, e(x, y).
using KernelFn = std::function<Complex(const Vec2&, const Vec2&)>;
// Real function on the plane (cutoffs, potentials).
using PlaneFn = std::function<double(const Vec2&)>;

}  // namespace magweyl

namespace magweyl {

// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Box {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{0.0, 0.0};
  [[nodiscard]] bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
  [[nodiscard]] double area() const { return (hi.x() - lo.x()) * (hi.y() - lo.y()); }
};

}  // namespace magweyl
