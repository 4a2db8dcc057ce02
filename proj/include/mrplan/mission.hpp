#pragma once

#include "mrplan/sim.hpp"
#include "mrplan/world.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mrplan {

struct TaskClause {
  std::string label;
  std::string description;
  std::vector<std::string> constraints;  // e.g. max speed, time limit, regions to avoid
  std::string trigger;                   // empty when none
  std::string finish;                    // nonempty: every task has a completion criterion
  std::vector<std::string> hints;
};

struct StandardizedMission {
  std::string overview;
  std::vector<RobotState> team;
  std::vector<DynamicObject> objects;
  std::vector<Region> regions;
  std::vector<TaskClause> tasks;
  std::string mission_finish;
  std::vector<std::string> hints;
};

struct MissionSpec {
  std::string mission_id;
  std::string raw_text;
  std::optional<StandardizedMission> standardized;
  std::string category;  // dataset label: A | B | C, optional
  WorldState world;      // initial conditions
  sim::SimConfig sim_config;
};

struct MissionParseError : std::runtime_error {
  explicit MissionParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mission file (JSON): top-level keys mission_id, raw_text, optional
// standardized, optional category, world{robots, objects, regions}, optional
// sim overrides. See docs/mission_format.md.
MissionSpec load_mission(const std::string& document);
MissionSpec load_mission_file(const std::string& path);
nlohmann::json mission_to_json(const MissionSpec& spec);

nlohmann::json standardized_to_json(const StandardizedMission& s);
StandardizedMission standardized_from_json(const nlohmann::json& j);
nlohmann::json world_to_json(const WorldState& w);
WorldState world_from_json(const nlohmann::json& j);
nlohmann::json task_to_json(const TaskClause& t);
TaskClause task_from_json(const nlohmann::json& j);

// Empty iff all invariants hold; each diagnostic names the field and reason.
// Checks: tasks nonempty, finishes nonempty, every entity id mentioned by the
// standardized sections resolves against the world.
std::vector<std::string> validate_spec(const StandardizedMission& spec, const WorldState& world);

// Mission-file level validation: world invariants + sim config + optional
// standardized section.
std::vector<std::string> validate_mission(const MissionSpec& spec);

}  // namespace mrplan
