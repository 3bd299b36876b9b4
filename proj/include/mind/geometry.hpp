#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mind {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Result of projecting a point onto a polyline.
struct Projection {
  double s = 0.0;        // arc length of the foot point
  double lateral = 0.0;  // signed offset, positive to the left of travel
  double distance = 0.0; // unsigned Euclidean distance to the foot point
  Vec2 foot = Vec2::Zero();
  Vec2 tangent = Vec2::UnitX();
  std::size_t segment = 0;
};

/// Piecewise-linear path parameterized by arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }

  /// Point at arc length s; extrapolates linearly past either end.
  Vec2 at(double s) const;
  /// Unit tangent at arc length s (clamped to the end segments).
  Vec2 tangent(double s) const;
  double heading(double s) const;

  Projection project(const Vec2& p) const;

  /// Sub-path starting at arc length s0.
  Polyline suffix(double s0) const;
  /// Concatenation, dropping a duplicated joint point.
  void append(const Polyline& other);

 private:
  std::size_t segment_at(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> cum_;
};

/// First crossing of two polylines, as arc lengths on each.
struct Crossing {
  double s_a = 0.0;
  double s_b = 0.0;
  Vec2 point = Vec2::Zero();
};

std::optional<Crossing> first_crossing(const Polyline& a, const Polyline& b,
                                       double min_s_a = 0.0);

}  // namespace mind
