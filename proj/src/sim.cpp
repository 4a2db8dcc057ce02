#include "mrplan/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mrplan::sim {

std::vector<std::string> validate_config(const SimConfig& cfg) {
  std::vector<std::string> diags;
  if (!(cfg.dt > 0.0)) diags.push_back("sim dt must be > 0");
  if (!(cfg.waypoint_tolerance > 0.0)) diags.push_back("sim waypoint_tolerance must be > 0");
  if (cfg.max_ticks <= 0) diags.push_back("sim max_ticks must be > 0");
  if (!(cfg.sense_radius > 0.0)) diags.push_back("sim sense_radius must be > 0");
  if (!(cfg.cell_size > 0.0)) diags.push_back("sim cell_size must be > 0");
  return diags;
}

std::string to_string(const SimEvent& e) {
  if (e.kind == SimEvent::Kind::RobotReachedWaypoint)
    return "robot " + std::to_string(e.entity_id) + " reached waypoint";
  return "object " + std::to_string(e.entity_id) + " entered region " +
         std::to_string(e.region_id);
}

Vec2 object_flee_velocity(const DynamicObject& obj, const std::vector<RobotState>& robots) {
  if (obj.v_max <= 0.0) return Vec2{0.0, 0.0};
  Vec2 push{0.0, 0.0};
  for (const auto& r : robots) {
    const Vec2 away = obj.position - r.position;
    const double d = away.norm();
    if (d >= obj.flee_radius) continue;
    const Vec2 dir = d < 1e-12 ? Vec2{1.0, 0.0} : Vec2(away / d);
    push += dir * (1.0 - d / obj.flee_radius);
  }
  Vec2 v = obj.flee_gain * push;
  const double speed = v.norm();
  if (speed > obj.v_max) v *= obj.v_max / speed;
  return v;
}

TickOutcome step(const WorldState& world, const SimConfig& cfg) {
  TickOutcome out;
  out.world = world;
  WorldState& w = out.world;

  // Start-of-tick snapshot for the synchronous object update.
  const std::vector<RobotState> robots_before = world.robots;

  for (auto& robot : w.robots) {
    if (robot.waypoint_queue.empty()) continue;
    const Waypoint wp = robot.waypoint_queue.front();
    const Vec2 to_wp = wp.point - robot.position;
    const double dist_to_wp = to_wp.norm();
    const double speed = std::min(robot.max_speed, std::max(wp.speed_cap, 0.0));
    const double step_len = std::min(speed * cfg.dt, dist_to_wp);
    if (step_len > 1e-12 && dist_to_wp > 1e-12) {
      const Vec2 dir = to_wp / dist_to_wp;
      robot.position += dir * step_len;
      robot.last_heading = std::atan2(dir.y(), dir.x());
    }
    if ((wp.point - robot.position).norm() <= cfg.waypoint_tolerance) {
      robot.waypoint_queue.pop_front();
      out.waypoints_consumed[robot.id] += 1;
      out.events.push_back(
          {SimEvent::Kind::RobotReachedWaypoint, robot.id, -1, wp.point});
    }
  }

  for (auto& obj : w.objects) {
    const Vec2 v = object_flee_velocity(obj, robots_before);
    const Vec2 displacement = v * cfg.dt;
    if (displacement.norm() > 1e-12) {
      obj.position += displacement;
      obj.last_heading = std::atan2(v.y(), v.x());
    }
  }

  // Region-entry events against the pre-step object positions.
  for (const auto& region : w.regions) {
    for (size_t i = 0; i < w.objects.size(); ++i) {
      const bool was_in = point_in_region(world.objects[i].position, region);
      const bool now_in = point_in_region(w.objects[i].position, region);
      if (!was_in && now_in)
        out.events.push_back({SimEvent::Kind::ObjectEnteredRegion, w.objects[i].id, region.id,
                              w.objects[i].position});
    }
  }

  w.time = world.time + cfg.dt;

  std::vector<Vec2> robot_positions;
  robot_positions.reserve(w.robots.size());
  for (const auto& r : w.robots) robot_positions.push_back(r.position);
  for (auto& [region_id, grid] : w.coverage)
    update_coverage(grid, robot_positions, cfg.sense_radius);

  return out;
}

TickOutcome step(const WorldState& world, const SimConfig& cfg,
                 const std::map<int, std::deque<Waypoint>>& active_waypoints) {
  WorldState staged = world;
  for (auto& robot : staged.robots) {
    const auto it = active_waypoints.find(robot.id);
    robot.waypoint_queue = it == active_waypoints.end() ? std::deque<Waypoint>{} : it->second;
  }
  return step(staged, cfg);
}

void TraceHasher::mix_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h_ ^= (v >> (8 * i)) & 0xffu;
    h_ *= 1099511628211ull;  // FNV-1a 64 prime
  }
}

void TraceHasher::mix_double(double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  mix_u64(bits);
}

void TraceHasher::mix_tick(const WorldState& w) {
  mix_double(w.time);
  for (const auto& r : w.robots) {
    mix_u64(static_cast<std::uint64_t>(r.id));
    mix_double(r.position.x());
    mix_double(r.position.y());
  }
  for (const auto& o : w.objects) {
    mix_u64(static_cast<std::uint64_t>(o.id));
    mix_double(o.position.x());
    mix_double(o.position.y());
  }
  for (const auto& [region_id, grid] : w.coverage) {
    mix_u64(static_cast<std::uint64_t>(region_id));
    mix_double(grid.fraction());
  }
}

std::string TraceHasher::digest() const {
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[i] = hex[(h_ >> (60 - 4 * i)) & 0xf];
  return out;
}

std::string trace_hash(const std::vector<WorldState>& ticks) {
  TraceHasher hasher;
  for (const auto& w : ticks) hasher.mix_tick(w);
  return hasher.digest();
}

nlohmann::json to_json(const TraceTick& t) {
  nlohmann::json j;
  j["type"] = "tick";
  j["tick"] = t.tick;
  j["time"] = t.time;
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [id, wp] : t.targets) {
    if (wp)
      targets[std::to_string(id)] = {{"p", {wp->point.x(), wp->point.y()}},
                                     {"cap", wp->speed_cap}};
    else
      targets[std::to_string(id)] = nullptr;
  }
  j["targets"] = std::move(targets);
  nlohmann::json robots = nlohmann::json::object();
  for (const auto& [id, p] : t.robot_positions) robots[std::to_string(id)] = {p.x(), p.y()};
  j["robots"] = std::move(robots);
  nlohmann::json objects = nlohmann::json::object();
  for (const auto& [id, p] : t.object_positions) objects[std::to_string(id)] = {p.x(), p.y()};
  j["objects"] = std::move(objects);
  nlohmann::json cov = nlohmann::json::object();
  for (const auto& [id, f] : t.coverage) cov[std::to_string(id)] = f;
  j["coverage"] = std::move(cov);
  j["events"] = t.events;
  return j;
}

TraceTick trace_tick_from_json(const nlohmann::json& j) {
  TraceTick t;
  t.tick = j.at("tick").get<long>();
  t.time = j.at("time").get<double>();
  for (const auto& [key, val] : j.at("targets").items()) {
    if (val.is_null()) {
      t.targets[std::stoi(key)] = std::nullopt;
    } else {
      Waypoint wp;
      wp.point = Vec2{val.at("p")[0].get<double>(), val.at("p")[1].get<double>()};
      wp.speed_cap = val.at("cap").get<double>();
      t.targets[std::stoi(key)] = wp;
    }
  }
  for (const auto& [key, val] : j.at("robots").items())
    t.robot_positions[std::stoi(key)] = Vec2{val[0].get<double>(), val[1].get<double>()};
  for (const auto& [key, val] : j.at("objects").items())
    t.object_positions[std::stoi(key)] = Vec2{val[0].get<double>(), val[1].get<double>()};
  for (const auto& [key, val] : j.at("coverage").items())
    t.coverage[std::stoi(key)] = val.get<double>();
  t.events = j.value("events", std::vector<std::string>{});
  return t;
}

}  // namespace mrplan::sim
