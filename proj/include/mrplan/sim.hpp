#pragma once

#include "mrplan/world.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mrplan::sim {

struct SimConfig {
  double dt = 0.1;                  // seconds
  double waypoint_tolerance = 0.05; // meters
  long max_ticks = 20000;
  double sense_radius = 0.5;        // coverage sensing, meters
  double cell_size = 0.25;          // coverage cell size, meters
  std::uint64_t seed = 0;
};

std::vector<std::string> validate_config(const SimConfig& cfg);

struct SimEvent {
  enum class Kind { RobotReachedWaypoint, ObjectEnteredRegion };
  Kind kind = Kind::RobotReachedWaypoint;
  int entity_id = 0;
  int region_id = -1;
  Vec2 point{0.0, 0.0};
};

std::string to_string(const SimEvent& e);

struct TickOutcome {
  WorldState world;
  std::map<int, int> waypoints_consumed;  // robot id -> popped this tick
  std::vector<SimEvent> events;
};

// Flee response: the inverse-linear sum of push directions away from every
// robot inside flee_radius, scaled by flee_gain and clamped to v_max.
Vec2 object_flee_velocity(const DynamicObject& obj, const std::vector<RobotState>& robots);

// One synchronous Euler tick: robots advance toward their head waypoint by
// min(max_speed, speed_cap)*dt without overshooting (popping on arrival within
// waypoint_tolerance), objects flee using start-of-tick robot positions,
// time += dt, coverage updates from the new robot positions. Robots with empty
// queues hold position. Deterministic.
TickOutcome step(const WorldState& world, const SimConfig& cfg);

// Replaces the embedded waypoint queues before stepping (replay path).
TickOutcome step(const WorldState& world, const SimConfig& cfg,
                 const std::map<int, std::deque<Waypoint>>& active_waypoints);

// Order-insensitive digest input is canonical: ids ascending, doubles hashed
// by bit pattern.
class TraceHasher {
 public:
  void mix_tick(const WorldState& w);
  std::string digest() const;  // 16 hex chars

 private:
  void mix_u64(std::uint64_t v);
  void mix_double(double v);
  std::uint64_t h_ = 1469598103934665603ull;  // FNV-1a 64 offset basis
};

std::string trace_hash(const std::vector<WorldState>& ticks);

// Line-delimited trace records (one JSON object per line).
struct TraceTick {
  long tick = 0;
  double time = 0.0;
  std::map<int, std::optional<Waypoint>> targets;  // head waypoint at tick start
  std::map<int, Vec2> robot_positions;
  std::map<int, Vec2> object_positions;
  std::map<int, double> coverage;
  std::vector<std::string> events;
};

nlohmann::json to_json(const TraceTick& t);
TraceTick trace_tick_from_json(const nlohmann::json& j);

}  // namespace mrplan::sim
