#pragma once

#include <cmath>
#include <numbers>

namespace csiloc {

/// 2D position in the dataset frame, millimetres. Negative coordinates are valid.
struct PointMm {
  double x{};
  double y{};

  friend bool operator==(const PointMm&, const PointMm&) = default;
};

inline double distance(PointMm a, PointMm b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

/// Closed interval [lo, hi] in millimetres.
struct Interval {
  double lo{};
  double hi{};

  double length() const noexcept { return hi - lo; }
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

struct Bounds {
  Interval x;
  Interval y;

  bool contains(PointMm p) const noexcept { return x.contains(p.x) && y.contains(p.y); }
};

/// Maps an angle onto (-pi, pi].
inline double wrap_angle(double radians) noexcept {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::remainder(radians, kTwoPi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

}  // namespace csiloc
