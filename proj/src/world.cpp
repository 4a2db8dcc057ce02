#include "mrplan/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mrplan {

CoverageGrid build_coverage_grid(const Region& region, double cell_size) {
  if (cell_size <= 0.0) throw ValidationError("coverage cell_size must be > 0");
  validate_region(region);
  Vec2 lo, hi;
  region_bounds(region, lo, hi);

  CoverageGrid grid;
  grid.region_id = region.id;
  grid.cell_size = cell_size;
  const int nx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_size)));
  const int ny = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_size)));
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 center = lo + Vec2{(ix + 0.5) * cell_size, (iy + 0.5) * cell_size};
      if (point_in_region(center, region)) grid.cell_centers.push_back(center);
    }
  }
  if (grid.cell_centers.empty())
    throw ValidationError("region " + std::to_string(region.id) +
                          ": no coverage cells at cell_size " + std::to_string(cell_size));
  grid.covered.assign(grid.cell_centers.size(), 0);
  return grid;
}

void update_coverage(CoverageGrid& grid, const std::vector<Vec2>& robot_positions,
                     double sense_radius) {
  const double r2 = sense_radius * sense_radius;
  for (size_t i = 0; i < grid.cell_centers.size(); ++i) {
    if (grid.covered[i]) continue;
    for (const auto& p : robot_positions) {
      if ((grid.cell_centers[i] - p).squaredNorm() <= r2) {
        grid.covered[i] = 1;
        ++grid.covered_count;
        break;
      }
    }
  }
}

RobotState* WorldState::find_robot(int id) {
  for (auto& r : robots)
    if (r.id == id) return &r;
  return nullptr;
}

const RobotState* WorldState::find_robot(int id) const {
  for (const auto& r : robots)
    if (r.id == id) return &r;
  return nullptr;
}

DynamicObject* WorldState::find_object(int id) {
  for (auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const DynamicObject* WorldState::find_object(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const Region* WorldState::find_region(int id) const {
  for (const auto& r : regions)
    if (r.id == id) return &r;
  return nullptr;
}

double WorldState::coverage_fraction(int region_id) const {
  auto it = coverage.find(region_id);
  return it == coverage.end() ? 0.0 : it->second.fraction();
}

std::vector<std::string> validate_world(const WorldState& w) {
  std::vector<std::string> diags;
  std::set<int> seen;
  for (const auto& r : w.robots) {
    if (r.id < 0) diags.push_back("robot id " + std::to_string(r.id) + " is negative");
    if (!seen.insert(r.id).second)
      diags.push_back("duplicate robot id " + std::to_string(r.id));
    if (!finite(r.position))
      diags.push_back("robot " + std::to_string(r.id) + ": non-finite position");
    if (!(r.max_speed > 0.0))
      diags.push_back("robot " + std::to_string(r.id) + ": max_speed must be > 0");
  }
  seen.clear();
  for (const auto& o : w.objects) {
    if (o.id < 0) diags.push_back("object id " + std::to_string(o.id) + " is negative");
    if (!seen.insert(o.id).second)
      diags.push_back("duplicate object id " + std::to_string(o.id));
    if (!finite(o.position))
      diags.push_back("object " + std::to_string(o.id) + ": non-finite position");
    if (o.v_max < 0.0) diags.push_back("object " + std::to_string(o.id) + ": v_max must be >= 0");
    if (o.v_max > 0.0 && (o.flee_radius <= 0.0 || o.flee_gain <= 0.0))
      diags.push_back("object " + std::to_string(o.id) +
                      ": flee_radius and flee_gain must be > 0 when v_max > 0");
  }
  seen.clear();
  for (const auto& r : w.regions) {
    if (r.id < 0) diags.push_back("region id " + std::to_string(r.id) + " is negative");
    if (!seen.insert(r.id).second)
      diags.push_back("duplicate region id " + std::to_string(r.id));
    try {
      validate_region(r);
    } catch (const ValidationError& e) {
      diags.push_back(e.what());
    }
  }
  if (w.time < 0.0 || !std::isfinite(w.time)) diags.push_back("world time must be >= 0");
  return diags;
}

void finalize_world(WorldState& w, double cell_size) {
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(w.robots.begin(), w.robots.end(), by_id);
  std::sort(w.objects.begin(), w.objects.end(), by_id);
  std::sort(w.regions.begin(), w.regions.end(), by_id);
  w.coverage.clear();
  for (const auto& region : w.regions) {
    try {
      w.coverage.emplace(region.id, build_coverage_grid(region, cell_size));
    } catch (const ValidationError&) {
      // Region too thin for this cell size; coverage() over it reports an
      // evaluation error instead.
    }
  }
}

}  // namespace mrplan
