#include "mrplan/mission.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mrplan {

namespace {

Vec2 vec2_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw MissionParseError(what + " must be an [x, y] pair");
  return Vec2{j[0].get<double>(), j[1].get<double>()};
}

nlohmann::json vec2_to_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

RegionKind kind_from_string(const std::string& s) {
  if (s == "target") return RegionKind::Target;
  if (s == "forbidden") return RegionKind::Forbidden;
  if (s == "plain") return RegionKind::Plain;
  throw MissionParseError("unknown region kind '" + s + "'");
}

std::string kind_to_string(RegionKind k) {
  switch (k) {
    case RegionKind::Target: return "target";
    case RegionKind::Forbidden: return "forbidden";
    case RegionKind::Plain: return "plain";
  }
  return "plain";
}

Region region_from_json(const nlohmann::json& j) {
  Region r;
  r.id = j.at("id").get<int>();
  r.name = j.value("name", std::string{});
  r.kind = kind_from_string(j.value("kind", std::string{"plain"}));
  const auto& shape = j.at("shape");
  const std::string type = shape.at("type").get<std::string>();
  if (type == "circle") {
    Circle c;
    c.center = vec2_from_json(shape.at("center"), "circle center");
    c.radius = shape.at("radius").get<double>();
    r.shape = c;
  } else if (type == "polygon") {
    Polygon p;
    for (const auto& v : shape.at("vertices"))
      p.vertices.push_back(vec2_from_json(v, "polygon vertex"));
    r.shape = p;
  } else {
    throw MissionParseError("unknown shape type '" + type + "'");
  }
  return r;
}

nlohmann::json region_to_json(const Region& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["name"] = r.name;
  j["kind"] = kind_to_string(r.kind);
  if (r.is_circle()) {
    j["shape"] = {{"type", "circle"},
                  {"center", vec2_to_json(r.circle().center)},
                  {"radius", r.circle().radius}};
  } else {
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& v : r.polygon().vertices) verts.push_back(vec2_to_json(v));
    j["shape"] = {{"type", "polygon"}, {"vertices", std::move(verts)}};
  }
  return j;
}

RobotState robot_from_json(const nlohmann::json& j) {
  RobotState r;
  r.id = j.at("id").get<int>();
  r.position = vec2_from_json(j.at("position"), "robot position");
  r.max_speed = j.value("max_speed", 1.0);
  return r;
}

nlohmann::json robot_to_json(const RobotState& r) {
  return {{"id", r.id}, {"position", vec2_to_json(r.position)}, {"max_speed", r.max_speed}};
}

DynamicObject object_from_json(const nlohmann::json& j) {
  DynamicObject o;
  o.id = j.at("id").get<int>();
  o.position = vec2_from_json(j.at("position"), "object position");
  o.v_max = j.value("v_max", 0.0);
  o.flee_radius = j.value("flee_radius", 1.0);
  o.flee_gain = j.value("flee_gain", 1.0);
  return o;
}

nlohmann::json object_to_json(const DynamicObject& o) {
  return {{"id", o.id},
          {"position", vec2_to_json(o.position)},
          {"v_max", o.v_max},
          {"flee_radius", o.flee_radius},
          {"flee_gain", o.flee_gain}};
}

}  // namespace

WorldState world_from_json(const nlohmann::json& j) {
  WorldState w;
  if (j.contains("robots"))
    for (const auto& r : j.at("robots")) w.robots.push_back(robot_from_json(r));
  if (j.contains("objects"))
    for (const auto& o : j.at("objects")) w.objects.push_back(object_from_json(o));
  if (j.contains("regions"))
    for (const auto& r : j.at("regions")) w.regions.push_back(region_from_json(r));
  w.rng_seed = j.value("seed", 0ull);
  return w;
}

nlohmann::json world_to_json(const WorldState& w) {
  nlohmann::json j;
  j["robots"] = nlohmann::json::array();
  for (const auto& r : w.robots) j["robots"].push_back(robot_to_json(r));
  j["objects"] = nlohmann::json::array();
  for (const auto& o : w.objects) j["objects"].push_back(object_to_json(o));
  j["regions"] = nlohmann::json::array();
  for (const auto& r : w.regions) j["regions"].push_back(region_to_json(r));
  j["seed"] = w.rng_seed;
  return j;
}

TaskClause task_from_json(const nlohmann::json& j) {
  TaskClause t;
  t.label = j.at("label").get<std::string>();
  t.description = j.value("description", std::string{});
  t.constraints = j.value("constraints", std::vector<std::string>{});
  t.trigger = j.value("trigger", std::string{});
  t.finish = j.value("finish", std::string{});
  t.hints = j.value("hints", std::vector<std::string>{});
  return t;
}

nlohmann::json task_to_json(const TaskClause& t) {
  return {{"label", t.label},          {"description", t.description},
          {"constraints", t.constraints}, {"trigger", t.trigger},
          {"finish", t.finish},        {"hints", t.hints}};
}

StandardizedMission standardized_from_json(const nlohmann::json& j) {
  StandardizedMission s;
  try {
    s.overview = j.value("overview", std::string{});
    if (j.contains("team"))
      for (const auto& r : j.at("team")) s.team.push_back(robot_from_json(r));
    if (j.contains("objects"))
      for (const auto& o : j.at("objects")) s.objects.push_back(object_from_json(o));
    if (j.contains("regions"))
      for (const auto& r : j.at("regions")) s.regions.push_back(region_from_json(r));
    if (!j.contains("tasks")) throw MissionParseError("standardized mission lacks 'tasks'");
    for (const auto& t : j.at("tasks")) s.tasks.push_back(task_from_json(t));
    s.mission_finish = j.value("mission_finish", std::string{});
    s.hints = j.value("hints", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw MissionParseError(std::string("malformed standardized mission: ") + e.what());
  }
  return s;
}

nlohmann::json standardized_to_json(const StandardizedMission& s) {
  nlohmann::json j;
  j["overview"] = s.overview;
  j["team"] = nlohmann::json::array();
  for (const auto& r : s.team) j["team"].push_back(robot_to_json(r));
  j["objects"] = nlohmann::json::array();
  for (const auto& o : s.objects) j["objects"].push_back(object_to_json(o));
  j["regions"] = nlohmann::json::array();
  for (const auto& r : s.regions) j["regions"].push_back(region_to_json(r));
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : s.tasks) j["tasks"].push_back(task_to_json(t));
  j["mission_finish"] = s.mission_finish;
  j["hints"] = s.hints;
  return j;
}

MissionSpec load_mission(const std::string& document) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw MissionParseError(std::string("mission file is not valid JSON: ") + e.what());
  }
  MissionSpec spec;
  try {
    spec.mission_id = j.at("mission_id").get<std::string>();
    spec.raw_text = j.at("raw_text").get<std::string>();
    spec.category = j.value("category", std::string{});
    if (!j.contains("world")) throw MissionParseError("mission file lacks 'world'");
    spec.world = world_from_json(j.at("world"));
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      spec.sim_config.dt = s.value("dt", spec.sim_config.dt);
      spec.sim_config.waypoint_tolerance =
          s.value("waypoint_tolerance", spec.sim_config.waypoint_tolerance);
      spec.sim_config.max_ticks = s.value("max_ticks", spec.sim_config.max_ticks);
      spec.sim_config.sense_radius = s.value("sense_radius", spec.sim_config.sense_radius);
      spec.sim_config.cell_size = s.value("cell_size", spec.sim_config.cell_size);
      spec.sim_config.seed = s.value("seed", spec.sim_config.seed);
    }
    spec.world.rng_seed = spec.sim_config.seed;
    if (j.contains("standardized") && !j.at("standardized").is_null())
      spec.standardized = standardized_from_json(j.at("standardized"));
  } catch (const nlohmann::json::exception& e) {
    throw MissionParseError(std::string("malformed mission file: ") + e.what());
  }

  // Ids referenced by the standardized section must resolve now; geometry
  // problems surface via validate_mission.
  if (spec.standardized) {
    const auto diags = validate_spec(*spec.standardized, spec.world);
    if (!diags.empty()) {
      std::ostringstream msg;
      msg << "mission file standardized section invalid:";
      for (const auto& d : diags) msg << "\n  - " << d;
      throw MissionParseError(msg.str());
    }
  }
  return spec;
}

MissionSpec load_mission_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissionParseError("cannot open mission file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_mission(buf.str());
}

nlohmann::json mission_to_json(const MissionSpec& spec) {
  nlohmann::json j;
  j["mission_id"] = spec.mission_id;
  j["raw_text"] = spec.raw_text;
  if (!spec.category.empty()) j["category"] = spec.category;
  j["world"] = world_to_json(spec.world);
  j["sim"] = {{"dt", spec.sim_config.dt},
              {"waypoint_tolerance", spec.sim_config.waypoint_tolerance},
              {"max_ticks", spec.sim_config.max_ticks},
              {"sense_radius", spec.sim_config.sense_radius},
              {"cell_size", spec.sim_config.cell_size},
              {"seed", spec.sim_config.seed}};
  if (spec.standardized) j["standardized"] = standardized_to_json(*spec.standardized);
  return j;
}

std::vector<std::string> validate_spec(const StandardizedMission& spec, const WorldState& world) {
  std::vector<std::string> diags;
  if (spec.tasks.empty()) diags.push_back("tasks: must be nonempty");
  for (const auto& t : spec.tasks) {
    if (t.label.empty()) diags.push_back("task: empty label");
    if (t.finish.empty())
      diags.push_back("task '" + t.label +
                      "': empty finish (every atomic task needs a completion criterion)");
  }
  std::set<std::string> labels;
  for (const auto& t : spec.tasks)
    if (!labels.insert(t.label).second) diags.push_back("task '" + t.label + "': duplicate label");

  for (const auto& r : spec.team)
    if (!world.find_robot(r.id))
      diags.push_back("team: robot id " + std::to_string(r.id) + " not declared in world");
  for (const auto& o : spec.objects)
    if (!world.find_object(o.id))
      diags.push_back("objects: object id " + std::to_string(o.id) + " not declared in world");
  for (const auto& r : spec.regions)
    if (!world.find_region(r.id))
      diags.push_back("regions: region id " + std::to_string(r.id) + " not declared in world");
  return diags;
}

std::vector<std::string> validate_mission(const MissionSpec& spec) {
  std::vector<std::string> diags = validate_world(spec.world);
  for (const auto& d : sim::validate_config(spec.sim_config)) diags.push_back(d);
  if (spec.mission_id.empty()) diags.push_back("mission_id: must be nonempty");
  if (spec.raw_text.empty()) diags.push_back("raw_text: must be nonempty");
  if (spec.standardized)
    for (const auto& d : validate_spec(*spec.standardized, spec.world)) diags.push_back(d);
  return diags;
}

}  // namespace mrplan
