#include "mrplan/geometry.hpp"

#include <algorithm>
#include <limits>

namespace mrplan {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double eps) {
  if (std::abs(orient(a, b, p)) > eps * (1.0 + (b - a).norm())) return false;
  const double lo_x = std::min(a.x(), b.x()) - eps, hi_x = std::max(a.x(), b.x()) + eps;
  const double lo_y = std::min(a.y(), b.y()) - eps, hi_y = std::max(a.y(), b.y()) + eps;
  return p.x() >= lo_x && p.x() <= hi_x && p.y() >= lo_y && p.y() <= hi_y;
}

constexpr double kBoundaryEps = 1e-9;

}  // namespace

void validate_region(const Region& r) {
  if (r.is_circle()) {
    const auto& c = r.circle();
    if (!finite(c.center) || !std::isfinite(c.radius))
      throw ValidationError("region " + std::to_string(r.id) + ": non-finite circle");
    if (c.radius <= 0.0)
      throw ValidationError("region " + std::to_string(r.id) + ": radius must be > 0");
    return;
  }
  const auto& poly = r.polygon().vertices;
  if (poly.size() < 3)
    throw ValidationError("region " + std::to_string(r.id) + ": polygon needs >= 3 vertices");
  for (const auto& v : poly)
    if (!finite(v)) throw ValidationError("region " + std::to_string(r.id) + ": non-finite vertex");

  bool collinear = true;
  for (size_t i = 2; i < poly.size() && collinear; ++i)
    if (std::abs(orient(poly[0], poly[1], poly[i])) > 1e-12) collinear = false;
  if (collinear)
    throw ValidationError("region " + std::to_string(r.id) + ": degenerate polygon (all vertices collinear)");

  // Simple-ring check: non-adjacent edges must not intersect.
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const size_t i2 = (i + 1) % n, j2 = (j + 1) % n;
      if (i == j || i2 == j || j2 == i) continue;  // shared endpoint
      if (segments_properly_intersect(poly[i], poly[i2], poly[j], poly[j2]))
        throw ValidationError("region " + std::to_string(r.id) + ": self-intersecting polygon");
    }
  }
}

bool point_in_region(const Vec2& p, const Region& r) {
  if (r.is_circle()) {
    const auto& c = r.circle();
    return distance(p, c.center) <= c.radius + kBoundaryEps;
  }
  const auto& poly = r.polygon().vertices;
  const size_t n = poly.size();
  if (n < 3)
    throw ValidationError("region " + std::to_string(r.id) + ": polygon needs >= 3 vertices");
  for (size_t i = 0; i < n; ++i)
    if (on_segment(p, poly[i], poly[(i + 1) % n], kBoundaryEps)) return true;

  // Even-odd ray cast toward +x.
  bool inside = false;
  for (size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const bool a_below = a.y() <= p.y(), b_below = b.y() <= p.y();
    if (a_below == b_below) continue;
    const double x_at = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
    if (x_at > p.x()) inside = !inside;
  }
  return inside;
}

double distance_to_region(const Vec2& p, const Region& r) {
  if (point_in_region(p, r)) return 0.0;
  if (r.is_circle()) {
    const auto& c = r.circle();
    return std::max(0.0, distance(p, c.center) - c.radius);
  }
  const auto& poly = r.polygon().vertices;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < poly.size(); ++i)
    best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  return best;
}

Vec2 region_centroid(const Region& r) {
  if (r.is_circle()) return r.circle().center;
  const auto& poly = r.polygon().vertices;
  double area2 = 0.0;
  Vec2 acc{0.0, 0.0};
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double w = cross(a, b);
    area2 += w;
    acc += (a + b) * w;
  }
  if (std::abs(area2) < 1e-12) {  // validate_region rejects these, but stay total
    Vec2 mean{0.0, 0.0};
    for (const auto& v : poly) mean += v;
    return mean / static_cast<double>(poly.size());
  }
  return acc / (3.0 * area2);
}

void region_bounds(const Region& r, Vec2& lo, Vec2& hi) {
  if (r.is_circle()) {
    const auto& c = r.circle();
    lo = c.center - Vec2{c.radius, c.radius};
    hi = c.center + Vec2{c.radius, c.radius};
    return;
  }
  const auto& poly = r.polygon().vertices;
  lo = Vec2{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  hi = -lo;
  for (const auto& v : poly) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-24) return distance(p, a);
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
  if (segments_properly_intersect(a0, a1, b0, b1, 0.0)) return 0.0;
  return std::min(std::min(point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)),
                  std::min(point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1)));
}

bool segments_properly_intersect(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1,
                                 double eps) {
  const double o1 = orient(a0, a1, b0);
  const double o2 = orient(a0, a1, b1);
  const double o3 = orient(b0, b1, a0);
  const double o4 = orient(b0, b1, a1);
  return ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
         ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps));
}

bool segment_intersects_region(const Vec2& a, const Vec2& b, const Region& r, double inflation) {
  if (r.is_circle()) {
    const auto& c = r.circle();
    return point_segment_distance(c.center, a, b) <= c.radius + inflation;
  }
  if (point_in_region(a, r) || point_in_region(b, r)) return true;
  const auto& poly = r.polygon().vertices;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p0 = poly[i];
    const Vec2& p1 = poly[(i + 1) % poly.size()];
    if (segment_segment_distance(a, b, p0, p1) <= inflation) return true;
  }
  return false;
}

}  // namespace mrplan
