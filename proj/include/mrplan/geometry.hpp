#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mrplan {

using Vec2 = Eigen::Vector2d;

inline bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

inline double distance(const Vec2& p, const Vec2& q) { return (p - q).norm(); }

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Circle {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
};

struct Polygon {
  std::vector<Vec2> vertices;
};

enum class RegionKind { Target, Forbidden, Plain };

struct Region {
  int id = 0;
  std::string name;
  std::variant<Circle, Polygon> shape;
  RegionKind kind = RegionKind::Plain;

  bool is_circle() const { return std::holds_alternative<Circle>(shape); }
  const Circle& circle() const { return std::get<Circle>(shape); }
  const Polygon& polygon() const { return std::get<Polygon>(shape); }
};

// Throws ValidationError on non-finite/degenerate geometry: radius <= 0,
// fewer than 3 vertices, all-collinear vertices, or self-intersecting rings.
void validate_region(const Region& r);

// Membership with the boundary counted inside. Circles by distance <= radius,
// polygons by the even-odd rule.
bool point_in_region(const Vec2& p, const Region& r);

// Euclidean distance to the nearest boundary point; 0 when p lies inside.
double distance_to_region(const Vec2& p, const Region& r);

// Area centroid for polygons, center for circles.
Vec2 region_centroid(const Region& r);

// Axis-aligned bounding box.
void region_bounds(const Region& r, Vec2& lo, Vec2& hi);

// Segment helpers shared by planning and the non-crossing checks.
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);
double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1);

// Proper-intersection test with an epsilon guard on the orientation tests;
// touching within `eps` does not count as a crossing.
bool segments_properly_intersect(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1,
                                 double eps = 1e-9);

// True when the segment comes within `inflation` of the region (or enters it).
bool segment_intersects_region(const Vec2& a, const Vec2& b, const Region& r, double inflation);

}  // namespace mrplan
