#pragma once

#include "mrplan/geometry.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mrplan {

struct Waypoint {
  Vec2 point{0.0, 0.0};
  double speed_cap = 1.0;  // m/s, clamped to the robot's max_speed at execution
};

struct RobotState {
  int id = 0;
  Vec2 position{0.0, 0.0};
  double max_speed = 1.0;  // m/s, > 0
  std::deque<Waypoint> waypoint_queue;
  double last_heading = 0.0;  // radians of the last displacement
};

struct DynamicObject {
  int id = 0;
  Vec2 position{0.0, 0.0};
  double v_max = 0.0;        // m/s
  double flee_radius = 1.0;  // meters
  double flee_gain = 1.0;    // 1/s
  double last_heading = 0.0;
};

// Cells are axis-aligned squares over the region's bounding box; a cell
// belongs to the region iff its center is inside. The covered set never
// shrinks.
struct CoverageGrid {
  int region_id = 0;
  double cell_size = 0.25;
  std::vector<Vec2> cell_centers;  // in-region cells only
  std::vector<char> covered;       // parallel to cell_centers
  int covered_count = 0;

  int total_in_region() const { return static_cast<int>(cell_centers.size()); }
  double fraction() const {
    return cell_centers.empty() ? 0.0 : static_cast<double>(covered_count) / cell_centers.size();
  }
};

// Throws ValidationError when the region holds no cell center at this size.
CoverageGrid build_coverage_grid(const Region& region, double cell_size);

// Marks every in-region cell whose center lies within sense_radius of any
// robot position. Monotone: already-covered cells stay covered.
void update_coverage(CoverageGrid& grid, const std::vector<Vec2>& robot_positions,
                     double sense_radius);

struct WorldState {
  double time = 0.0;  // seconds, nondecreasing
  std::vector<RobotState> robots;        // sorted by id
  std::vector<DynamicObject> objects;    // sorted by id
  std::vector<Region> regions;           // sorted by id
  std::map<int, CoverageGrid> coverage;  // region id -> grid, where buildable
  std::uint64_t rng_seed = 0;

  RobotState* find_robot(int id);
  const RobotState* find_robot(int id) const;
  DynamicObject* find_object(int id);
  const DynamicObject* find_object(int id) const;
  const Region* find_region(int id) const;

  double coverage_fraction(int region_id) const;  // 0 when no grid exists
  bool has_grid(int region_id) const { return coverage.count(region_id) > 0; }
};

// Structural diagnostics: duplicate/negative ids, non-finite positions,
// non-positive speeds, invalid regions, bad flee parameters.
std::vector<std::string> validate_world(const WorldState& w);

// Sorts entity vectors by id and builds coverage grids for every region that
// admits at least one cell center at `cell_size`.
void finalize_world(WorldState& w, double cell_size);

}  // namespace mrplan
