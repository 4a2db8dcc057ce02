#pragma once

#include "mrplan/world.hpp"

#include <map>
#include <optional>
#include <vector>

namespace mrplan::behaviors {

enum class Regeneration { Static, PerTick };

struct GoalSet {
  std::vector<Vec2> goals;
  std::vector<std::optional<double>> speed_caps;  // parallel to goals, optional per goal
  Regeneration regeneration = Regeneration::Static;
};

// robot id -> goal index; injective both ways over the assigned subset.
using Assignment = std::map<int, int>;

struct LineFormation {
  Vec2 from{0.0, 0.0}, to{0.0, 0.0};
  int count = 0;
};

struct CircleFormation {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
  int count = 0;
  double phase = 0.0;  // radians
};

GoalSet gen_visit_points(const std::vector<Vec2>& points);
GoalSet gen_visit_points(const LineFormation& line);
GoalSet gen_visit_points(const CircleFormation& circle);

// One goal per object at position + offset; recomputed every tick.
GoalSet gen_follow_targets(const std::vector<int>& object_ids, const Vec2& offset,
                           const WorldState& world);

// Per object outside the target region: a drive point d_behind beyond the
// object on the ray from the region centroid through the object, so a robot
// there pushes the fleeing object toward the region. Objects already inside
// emit no goal.
GoalSet gen_herd(const std::vector<int>& object_ids, const Region& target_region, double d_behind,
                 const WorldState& world);

// k-th smallest robot id -> k-th goal. Requires equal counts (see pad_goals).
Assignment allocate_default(const std::vector<int>& robot_ids, const GoalSet& goals);

// Minimum total Euclidean distance assignment (cubic-time optimal assignment),
// ties broken lexicographically by (robot order, goal index). Straight-line
// segments of the result are pairwise non-crossing for points in general
// position.
Assignment allocate_min_conflict(const std::vector<int>& robot_ids,
                                 const std::vector<Vec2>& robot_positions, const GoalSet& goals);

double assignment_cost(const std::vector<Vec2>& robot_positions, const std::vector<Vec2>& goals,
                       const Assignment& assignment, const std::vector<int>& robot_ids);

// Count-mismatch rule applied before either allocator: the surplus robots with
// the largest ids hold position (their own position becomes their goal);
// surplus goals with the largest indices are deferred.
struct PaddedProblem {
  std::vector<int> robot_ids;        // participants, sorted
  std::vector<Vec2> robot_positions; // parallel to robot_ids
  GoalSet goals;                     // exactly robot_ids.size() goals
  std::vector<int> stay_robot_ids;   // surplus robots holding position
  std::vector<int> deferred_goals;   // surplus goal indices, ascending
};
PaddedProblem pad_goals(const std::vector<int>& robot_ids, const WorldState& world,
                        const GoalSet& goals);

struct UnreachableError : std::runtime_error {
  explicit UnreachableError(const std::string& msg) : std::runtime_error(msg) {}
};

// Straight shot when the segment clears every inflated forbidden region;
// otherwise a shortest 8-connected grid path over the rasterized forbidden
// set, shortcut by greedy line-of-sight. Every waypoint carries speed_cap.
// Throws UnreachableError when the goal cannot be reached.
std::vector<Waypoint> plan_path(const Vec2& start, const Vec2& goal,
                                const std::vector<Region>& forbidden_regions, double resolution,
                                double speed_cap, double inflation = 0.1);

// Rasterized occupancy used by plan_path; exposed for the oracle tests.
struct ObstacleGrid {
  Vec2 origin{0.0, 0.0};
  double resolution = 0.1;
  int nx = 0, ny = 0;
  std::vector<char> blocked;  // row-major, iy * nx + ix

  bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < nx && iy >= 0 && iy < ny; }
  bool is_blocked(int ix, int iy) const { return blocked[static_cast<size_t>(iy) * nx + ix] != 0; }
  Vec2 center(int ix, int iy) const {
    return origin + Vec2{(ix + 0.5) * resolution, (iy + 0.5) * resolution};
  }
  std::pair<int, int> cell_of(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x() - origin.x()) / resolution)),
            static_cast<int>(std::floor((p.y() - origin.y()) / resolution))};
  }
};

ObstacleGrid rasterize(const Vec2& start, const Vec2& goal,
                       const std::vector<Region>& forbidden_regions, double resolution,
                       double inflation);

// Supercover traversal: true when every grid cell crossed by the segment is
// free.
bool grid_line_of_sight(const ObstacleGrid& grid, const Vec2& a, const Vec2& b);

}  // namespace mrplan::behaviors
