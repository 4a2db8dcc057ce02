#include "mrplan/behaviors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace mrplan::behaviors {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

GoalSet gen_visit_points(const std::vector<Vec2>& points) {
  GoalSet gs;
  gs.goals = points;
  gs.speed_caps.assign(points.size(), std::nullopt);
  return gs;
}

GoalSet gen_visit_points(const LineFormation& line) {
  if (line.count < 1) throw ValidationError("line formation needs count >= 1");
  if (line.count > 1 && distance(line.from, line.to) < 1e-12)
    throw ValidationError("degenerate line formation: from == to with count > 1");
  GoalSet gs;
  if (line.count == 1) {
    gs.goals.push_back(line.from);
  } else {
    for (int k = 0; k < line.count; ++k) {
      const double t = static_cast<double>(k) / (line.count - 1);
      gs.goals.push_back(line.from + t * (line.to - line.from));
    }
  }
  gs.speed_caps.assign(gs.goals.size(), std::nullopt);
  return gs;
}

GoalSet gen_visit_points(const CircleFormation& circle) {
  if (circle.count < 1) throw ValidationError("circle formation needs count >= 1");
  if (circle.radius <= 0.0) throw ValidationError("circle formation needs radius > 0");
  GoalSet gs;
  for (int k = 0; k < circle.count; ++k) {
    const double a = circle.phase + 2.0 * M_PI * k / circle.count;
    gs.goals.push_back(circle.center + circle.radius * Vec2{std::cos(a), std::sin(a)});
  }
  gs.speed_caps.assign(gs.goals.size(), std::nullopt);
  return gs;
}

GoalSet gen_follow_targets(const std::vector<int>& object_ids, const Vec2& offset,
                           const WorldState& world) {
  GoalSet gs;
  gs.regeneration = Regeneration::PerTick;
  for (int id : object_ids) {
    const DynamicObject* obj = world.find_object(id);
    if (!obj) throw ValidationError("gen_follow_targets: unknown object id " + std::to_string(id));
    gs.goals.push_back(obj->position + offset);
  }
  gs.speed_caps.assign(gs.goals.size(), std::nullopt);
  return gs;
}

GoalSet gen_herd(const std::vector<int>& object_ids, const Region& target_region, double d_behind,
                 const WorldState& world) {
  if (d_behind <= 0.0) throw ValidationError("gen_herd: d_behind must be > 0");
  const Vec2 centroid = region_centroid(target_region);
  GoalSet gs;
  gs.regeneration = Regeneration::PerTick;
  for (int id : object_ids) {
    const DynamicObject* obj = world.find_object(id);
    if (!obj) throw ValidationError("gen_herd: unknown object id " + std::to_string(id));
    if (point_in_region(obj->position, target_region)) continue;
    Vec2 dir = obj->position - centroid;
    if (dir.norm() < 1e-9) dir = Vec2{1.0, 0.0};  // ray undefined, perturb along +x
    gs.goals.push_back(obj->position + d_behind * dir.normalized());
  }
  gs.speed_caps.assign(gs.goals.size(), std::nullopt);
  return gs;
}

PaddedProblem pad_goals(const std::vector<int>& robot_ids, const WorldState& world,
                        const GoalSet& goals) {
  PaddedProblem out;
  std::vector<int> sorted_ids = robot_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  sorted_ids.erase(std::unique(sorted_ids.begin(), sorted_ids.end()), sorted_ids.end());

  const size_t n_goals = goals.goals.size();
  const size_t n_robots = sorted_ids.size();
  const size_t n = std::min(n_goals, n_robots);

  out.goals.regeneration = goals.regeneration;
  for (size_t k = 0; k < n; ++k) {
    out.goals.goals.push_back(goals.goals[k]);
    out.goals.speed_caps.push_back(k < goals.speed_caps.size() ? goals.speed_caps[k]
                                                               : std::nullopt);
  }
  for (size_t k = n; k < n_goals; ++k) out.deferred_goals.push_back(static_cast<int>(k));

  for (size_t k = 0; k < n_robots; ++k) {
    const int id = sorted_ids[k];
    const RobotState* r = world.find_robot(id);
    if (!r) throw ValidationError("pad_goals: unknown robot id " + std::to_string(id));
    if (k < n) {
      out.robot_ids.push_back(id);
      out.robot_positions.push_back(r->position);
    } else {
      out.stay_robot_ids.push_back(id);  // largest ids hold position
    }
  }
  return out;
}

Assignment allocate_default(const std::vector<int>& robot_ids, const GoalSet& goals) {
  std::vector<int> sorted_ids = robot_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  if (sorted_ids.size() != goals.goals.size())
    throw ValidationError("allocate_default: robot and goal counts differ (pad first)");
  Assignment out;
  for (size_t k = 0; k < sorted_ids.size(); ++k) out[sorted_ids[k]] = static_cast<int>(k);
  return out;
}

namespace {

// O(n^3) optimal assignment via shortest augmenting paths with potentials.
// Rows are robots (in the given order), columns are goals. Returns row->col.
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double solve_cost(const Eigen::MatrixXd& cost) {
  const auto cols = hungarian(cost);
  double total = 0.0;
  for (int i = 0; i < cost.rows(); ++i) total += cost(i, cols[i]);
  return total;
}

// Minimum assignment cost with rows [0, n_fixed) already pinned to
// fixed_cols; kInf when infeasible.
double cost_with_prefix(const Eigen::MatrixXd& cost, const std::vector<int>& fixed_cols) {
  const int n = static_cast<int>(cost.rows());
  const int k = static_cast<int>(fixed_cols.size());
  double fixed_total = 0.0;
  std::vector<char> col_taken(n, 0);
  for (int i = 0; i < k; ++i) {
    fixed_total += cost(i, fixed_cols[i]);
    col_taken[fixed_cols[i]] = 1;
  }
  if (k == n) return fixed_total;
  std::vector<int> free_cols;
  for (int j = 0; j < n; ++j)
    if (!col_taken[j]) free_cols.push_back(j);
  Eigen::MatrixXd sub(n - k, n - k);
  for (int i = k; i < n; ++i)
    for (size_t j = 0; j < free_cols.size(); ++j) sub(i - k, j) = cost(i, free_cols[j]);
  return fixed_total + solve_cost(sub);
}

}  // namespace

Assignment allocate_min_conflict(const std::vector<int>& robot_ids,
                                 const std::vector<Vec2>& robot_positions, const GoalSet& goals) {
  const size_t n = robot_ids.size();
  if (robot_positions.size() != n)
    throw ValidationError("allocate_min_conflict: ids and positions differ in length");
  if (goals.goals.size() != n)
    throw ValidationError("allocate_min_conflict: robot and goal counts differ (pad first)");
  for (const auto& p : robot_positions)
    if (!finite(p)) throw ValidationError("allocate_min_conflict: non-finite robot position");
  for (const auto& g : goals.goals)
    if (!finite(g)) throw ValidationError("allocate_min_conflict: non-finite goal");
  if (n == 0) return {};

  // Rows in ascending robot-id order so the lexicographic tie-break is over
  // (robot_id, goal index).
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return robot_ids[a] < robot_ids[b]; });

  Eigen::MatrixXd cost(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      cost(static_cast<int>(i), static_cast<int>(j)) =
          distance(robot_positions[order[i]], goals.goals[j]);

  const double best = solve_cost(cost);
  const double slack = 1e-12 * (1.0 + std::abs(best));

  // Greedy lexicographic refinement: pin each row to the smallest goal index
  // that still admits an optimal completion.
  std::vector<int> fixed_cols;
  std::vector<char> taken(n, 0);
  for (size_t i = 0; i < n; ++i) {
    bool pinned = false;
    for (size_t j = 0; j < n && !pinned; ++j) {
      if (taken[j]) continue;
      fixed_cols.push_back(static_cast<int>(j));
      if (cost_with_prefix(cost, fixed_cols) <= best + slack) {
        taken[j] = 1;
        pinned = true;
      } else {
        fixed_cols.pop_back();
      }
    }
    if (!pinned) throw ValidationError("allocate_min_conflict: internal refinement failure");
  }

  Assignment out;
  for (size_t i = 0; i < n; ++i) out[robot_ids[order[i]]] = fixed_cols[i];
  return out;
}

double assignment_cost(const std::vector<Vec2>& robot_positions, const std::vector<Vec2>& goals,
                       const Assignment& assignment, const std::vector<int>& robot_ids) {
  double total = 0.0;
  for (size_t i = 0; i < robot_ids.size(); ++i) {
    const auto it = assignment.find(robot_ids[i]);
    if (it == assignment.end()) continue;
    total += distance(robot_positions[i], goals[static_cast<size_t>(it->second)]);
  }
  return total;
}

ObstacleGrid rasterize(const Vec2& start, const Vec2& goal,
                       const std::vector<Region>& forbidden_regions, double resolution,
                       double inflation) {
  if (resolution <= 0.0) throw ValidationError("plan_path: resolution must be > 0");
  Vec2 lo = start.cwiseMin(goal), hi = start.cwiseMax(goal);
  for (const auto& r : forbidden_regions) {
    Vec2 rlo, rhi;
    region_bounds(r, rlo, rhi);
    lo = lo.cwiseMin(rlo - Vec2{inflation, inflation});
    hi = hi.cwiseMax(rhi + Vec2{inflation, inflation});
  }
  const double pad = 1.0 + resolution;
  lo -= Vec2{pad, pad};
  hi += Vec2{pad, pad};

  ObstacleGrid grid;
  grid.origin = lo;
  grid.resolution = resolution;
  grid.nx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / resolution)));
  grid.ny = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / resolution)));
  if (static_cast<long long>(grid.nx) * grid.ny > 8'000'000)
    throw ValidationError("plan_path: grid too large at this resolution");
  grid.blocked.assign(static_cast<size_t>(grid.nx) * grid.ny, 0);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Vec2 c = grid.center(ix, iy);
      for (const auto& r : forbidden_regions) {
        if (point_in_region(c, r) || distance_to_region(c, r) <= inflation) {
          grid.blocked[static_cast<size_t>(iy) * grid.nx + ix] = 1;
          break;
        }
      }
    }
  }
  return grid;
}

bool grid_line_of_sight(const ObstacleGrid& grid, const Vec2& a, const Vec2& b) {
  auto [ix, iy] = grid.cell_of(a);
  const auto [jx, jy] = grid.cell_of(b);
  if (!grid.in_bounds(ix, iy) || !grid.in_bounds(jx, jy)) return false;
  if (grid.is_blocked(ix, iy) || grid.is_blocked(jx, jy)) return false;

  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  const int step_x = dx > 0 ? 1 : dx < 0 ? -1 : 0;
  const int step_y = dy > 0 ? 1 : dy < 0 ? -1 : 0;
  auto boundary_t = [&](double origin, double pos, double d, int step) {
    if (step == 0) return kInf;
    const double cell_edge =
        origin + (std::floor((pos - origin) / grid.resolution) + (step > 0 ? 1.0 : 0.0)) *
                     grid.resolution;
    return (cell_edge - pos) / d;
  };
  double t_max_x = boundary_t(grid.origin.x(), a.x(), dx, step_x);
  double t_max_y = boundary_t(grid.origin.y(), a.y(), dy, step_y);
  const double t_delta_x = step_x ? grid.resolution / std::abs(dx) : kInf;
  const double t_delta_y = step_y ? grid.resolution / std::abs(dy) : kInf;

  long long guard = static_cast<long long>(grid.nx) + grid.ny + 4;
  while (ix != jx || iy != jy) {
    if (guard-- < 0) return false;
    if (t_max_x < t_max_y - 1e-12) {
      ix += step_x;
      t_max_x += t_delta_x;
    } else if (t_max_y < t_max_x - 1e-12) {
      iy += step_y;
      t_max_y += t_delta_y;
    } else {
      // Corner crossing: require both adjacent cells free.
      if (grid.in_bounds(ix + step_x, iy) && grid.is_blocked(ix + step_x, iy)) return false;
      if (grid.in_bounds(ix, iy + step_y) && grid.is_blocked(ix, iy + step_y)) return false;
      ix += step_x;
      iy += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    }
    if (!grid.in_bounds(ix, iy) || grid.is_blocked(ix, iy)) return false;
  }
  return true;
}

namespace {

struct AStarNode {
  double f = 0.0;
  double g = 0.0;
  int cell = 0;
};

struct AStarCmp {
  bool operator()(const AStarNode& a, const AStarNode& b) const {
    if (a.f != b.f) return a.f > b.f;
    return a.cell > b.cell;  // deterministic tie order
  }
};

}  // namespace

std::vector<Waypoint> plan_path(const Vec2& start, const Vec2& goal,
                                const std::vector<Region>& forbidden_regions, double resolution,
                                double speed_cap, double inflation) {
  if (speed_cap <= 0.0) throw ValidationError("plan_path: speed_cap must be > 0");
  for (const auto& r : forbidden_regions) {
    if (point_in_region(goal, r) || distance_to_region(goal, r) <= inflation)
      throw UnreachableError("goal lies inside inflated forbidden region " + std::to_string(r.id));
    if (point_in_region(start, r) || distance_to_region(start, r) <= inflation)
      throw UnreachableError("start lies inside inflated forbidden region " +
                             std::to_string(r.id));
  }

  bool clear = true;
  for (const auto& r : forbidden_regions)
    if (segment_intersects_region(start, goal, r, inflation)) {
      clear = false;
      break;
    }
  if (clear) return {Waypoint{goal, speed_cap}};

  const ObstacleGrid grid = rasterize(start, goal, forbidden_regions, resolution, inflation);
  auto [sx, sy] = grid.cell_of(start);
  auto [gx, gy] = grid.cell_of(goal);
  ObstacleGrid map = grid;
  // The exact endpoints are known free; their cells must be traversable even
  // when the cell center falls inside the inflated set.
  map.blocked[static_cast<size_t>(sy) * map.nx + sx] = 0;
  map.blocked[static_cast<size_t>(gy) * map.nx + gx] = 0;

  const int n_cells = map.nx * map.ny;
  const int start_cell = sy * map.nx + sx;
  const int goal_cell = gy * map.nx + gx;
  std::vector<double> g_score(n_cells, kInf);
  std::vector<int> came_from(n_cells, -1);
  std::priority_queue<AStarNode, std::vector<AStarNode>, AStarCmp> open;
  auto heuristic = [&](int cell) {
    const int ix = cell % map.nx, iy = cell / map.nx;
    const double ax = std::abs(ix - gx), ay = std::abs(iy - gy);
    return map.resolution * (std::max(ax, ay) + (M_SQRT2 - 1.0) * std::min(ax, ay));
  };
  g_score[start_cell] = 0.0;
  open.push({heuristic(start_cell), 0.0, start_cell});

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  bool found = false;
  while (!open.empty()) {
    const AStarNode cur = open.top();
    open.pop();
    if (cur.cell == goal_cell) {
      found = true;
      break;
    }
    if (cur.g > g_score[cur.cell] + 1e-15) continue;
    const int ix = cur.cell % map.nx, iy = cur.cell / map.nx;
    for (int k = 0; k < 8; ++k) {
      const int nx2 = ix + kDx[k], ny2 = iy + kDy[k];
      if (!map.in_bounds(nx2, ny2) || map.is_blocked(nx2, ny2)) continue;
      if (k >= 4) {  // no diagonal corner cutting
        if (map.is_blocked(ix + kDx[k], iy) || map.is_blocked(ix, iy + kDy[k])) continue;
      }
      const int ncell = ny2 * map.nx + nx2;
      const double step = map.resolution * (k >= 4 ? M_SQRT2 : 1.0);
      const double ng = cur.g + step;
      if (ng < g_score[ncell] - 1e-15) {
        g_score[ncell] = ng;
        came_from[ncell] = cur.cell;
        open.push({ng + heuristic(ncell), ng, ncell});
      }
    }
  }
  if (!found) throw UnreachableError("plan_path: no grid path from start to goal");

  std::vector<Vec2> pts;
  for (int cell = goal_cell; cell != -1; cell = came_from[cell])
    pts.push_back(map.center(cell % map.nx, cell / map.nx));
  std::reverse(pts.begin(), pts.end());
  pts.front() = start;
  pts.back() = goal;

  // Greedy line-of-sight shortcutting over the rasterized map.
  std::vector<Vec2> shortcut{pts.front()};
  size_t i = 0;
  while (i + 1 < pts.size()) {
    size_t j = pts.size() - 1;
    while (j > i + 1 && !grid_line_of_sight(map, pts[i], pts[j])) --j;
    shortcut.push_back(pts[j]);
    i = j;
  }

  std::vector<Waypoint> out;
  for (size_t k = 1; k < shortcut.size(); ++k) out.push_back(Waypoint{shortcut[k], speed_cap});
  return out;
}

}  // namespace mrplan::behaviors
