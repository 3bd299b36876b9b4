#include "mind/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <stdexcept>

namespace mind {

double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  cum_.reserve(points_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) acc += (points_[i] - points_[i - 1]).norm();
    cum_.push_back(acc);
  }
}

std::size_t Polyline::segment_at(double s) const {
  if (points_.size() < 2) return 0;
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t idx = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
  return std::min(idx, points_.size() - 2);
}

Vec2 Polyline::at(double s) const {
  if (points_.empty()) return Vec2::Zero();
  if (points_.size() == 1) return points_.front();
  const std::size_t i = segment_at(s);
  const Vec2 d = points_[i + 1] - points_[i];
  const double len = cum_[i + 1] - cum_[i];
  return points_[i] + d * ((s - cum_[i]) / len);
}

Vec2 Polyline::tangent(double s) const {
  if (points_.size() < 2) return Vec2::UnitX();
  const std::size_t i = segment_at(s);
  return (points_[i + 1] - points_[i]).normalized();
}

double Polyline::heading(double s) const {
  const Vec2 t = tangent(s);
  return std::atan2(t.y(), t.x());
}

Projection Polyline::project(const Vec2& p) const {
  Projection best;
  if (points_.empty()) return best;
  if (points_.size() == 1) {
    best.foot = points_.front();
    best.distance = (p - best.foot).norm();
    return best;
  }
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i];
    const Vec2 d = points_[i + 1] - a;
    const double len2 = d.squaredNorm();
    double u = (p - a).dot(d) / len2;
    // The end segments extend past the polyline so projections stay smooth.
    const double lo = i == 0 ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi = i + 2 == points_.size() ? std::numeric_limits<double>::infinity() : 1.0;
    u = std::clamp(u, lo, hi);
    const Vec2 foot = a + u * d;
    const double d2 = (p - foot).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.segment = i;
      best.foot = foot;
      best.tangent = d / std::sqrt(len2);
      best.s = cum_[i] + u * std::sqrt(len2);
    }
  }
  const Vec2 off = p - best.foot;
  best.distance = std::sqrt(best_d2);
  best.lateral = best.tangent.x() * off.y() - best.tangent.y() * off.x();
  return best;
}

Polyline Polyline::suffix(double s0) const {
  if (points_.size() < 2) return *this;
  s0 = std::clamp(s0, 0.0, length());
  std::vector<Vec2> pts;
  pts.push_back(at(s0));
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (cum_[i] > s0 + 1e-9) pts.push_back(points_[i]);
  }
  if (pts.size() == 1) {
    // s0 sits on the final point; keep a short stub along the last tangent.
    pts.push_back(pts.front() + tangent(length()) * 1e-3);
  }
  return Polyline(std::move(pts));
}

void Polyline::append(const Polyline& other) {
  std::vector<Vec2> pts = points_;
  for (const Vec2& p : other.points_) {
    if (!pts.empty() && (pts.back() - p).norm() < 1e-9) continue;
    pts.push_back(p);
  }
  *this = Polyline(std::move(pts));
}

std::optional<Crossing> first_crossing(const Polyline& a, const Polyline& b,
                                       double min_s_a) {
  const auto& pa = a.points();
  const auto& pb = b.points();
  std::optional<Crossing> best;
  double sa_base = 0.0;
  for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
    const Vec2 p = pa[i];
    const Vec2 r = pa[i + 1] - pa[i];
    const double rlen = r.norm();
    double sb_base = 0.0;
    for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
      const Vec2 q = pb[j];
      const Vec2 sv = pb[j + 1] - pb[j];
      const double slen = sv.norm();
      const double denom = r.x() * sv.y() - r.y() * sv.x();
      if (std::abs(denom) > 1e-12 * rlen * slen) {
        const Vec2 qp = q - p;
        const double t = (qp.x() * sv.y() - qp.y() * sv.x()) / denom;
        const double u = (qp.x() * r.y() - qp.y() * r.x()) / denom;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
          const double sa = sa_base + t * rlen;
          if (sa >= min_s_a && (!best || sa < best->s_a)) {
            best = Crossing{sa, sb_base + u * slen, p + t * r};
          }
        }
      }
      sb_base += slen;
    }
    sa_base += rlen;
  }
  return best;
}

}  // namespace mind
