#pragma once

#include "mrplan/btree.hpp"
#include "mrplan/dsl.hpp"
#include "mrplan/world.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <variant>
#include <vector>

namespace mrplan::plan {

enum class Allocation { Default, MinConflict };

struct GoalSpec {
  enum class Kind { Points, Line, Circle, Follow, Herd };
  Kind kind = Kind::Points;
  std::vector<Vec2> points;
  Vec2 from{0.0, 0.0}, to{0.0, 0.0};  // line
  Vec2 center{0.0, 0.0};              // circle
  double radius = 0.0;
  int count = 0;
  double phase = 0.0;
  std::vector<int> object_ids;  // follow / herd
  Vec2 offset{0.0, 0.0};        // follow
  int region_id = -1;           // herd
  double d_behind = 0.7;        // herd
};

struct MetaCall {
  bt::ActionType primitive = bt::ActionType::VisitPoints;
  GoalSpec goals;
  Allocation allocation = Allocation::Default;
  std::optional<double> speed_cap;
  std::vector<int> avoid_region_ids;
};

struct WaypointProgram {
  std::map<int, std::vector<Waypoint>> routes;  // robot id -> ordered waypoints
};

struct ParametricPath {
  dsl::ExprPtr x_expr;
  dsl::ExprPtr y_expr;
  double t_start = 0.0;
  double t_end = 1.0;
  int samples = 2;
  double speed_cap = 1.0;
};

struct ParametricProgram {
  std::map<int, ParametricPath> paths;  // robot id -> trajectory
};

using ExecutionPlan = std::variant<MetaCall, WaypointProgram, ParametricProgram>;

struct PlanDoc {
  int node_idx = 0;
  ExecutionPlan execution;
  dsl::ExprPtr trigger;  // constant false when the node has no trigger
  dsl::ExprPtr finish;
};

struct PlanParseError : std::runtime_error {
  explicit PlanParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Validation context: the action node's bindings plus the world's id universe.
struct PlanBindings {
  int node_idx = 0;
  std::optional<bt::ActionType> action_type;
  std::vector<int> robot_ids;
  std::vector<int> object_ids;
  std::vector<int> region_ids;
  dsl::WorldIds world_ids;
};

// Parses the {"execution":…, "trigger":…, "finish":…} document, compiles both
// conditions, and validates every referenced id. A missing/empty trigger
// becomes the constant-false expression. Throws PlanParseError with
// diagnostics suitable for a repair prompt.
PlanDoc parse_plan(const std::string& text, const PlanBindings& bindings);

nlohmann::json plan_to_json(const PlanDoc& doc);

// n waypoints at t_k = t_start + k*(t_end-t_start)/(samples-1); each carries
// the path's speed_cap. Expression errors at any t_k propagate as DslError.
std::vector<Waypoint> sample_parametric(const ParametricPath& path);

// Canonical constant-false trigger.
dsl::ExprPtr false_expr();

}  // namespace mrplan::plan
