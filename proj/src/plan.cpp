#include "mrplan/plan.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <sstream>

namespace mrplan::plan {

namespace {

Vec2 vec2_at(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2)
    throw PlanParseError(std::string(what) + " must be an [x, y] pair");
  return Vec2{j[0].get<double>(), j[1].get<double>()};
}

GoalSpec goals_from_json(const nlohmann::json& j) {
  GoalSpec g;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "points") {
    g.kind = GoalSpec::Kind::Points;
    for (const auto& p : j.at("points")) g.points.push_back(vec2_at(p, "goal point"));
  } else if (kind == "line") {
    g.kind = GoalSpec::Kind::Line;
    g.from = vec2_at(j.at("from"), "line from");
    g.to = vec2_at(j.at("to"), "line to");
    g.count = j.at("count").get<int>();
  } else if (kind == "circle") {
    g.kind = GoalSpec::Kind::Circle;
    g.center = vec2_at(j.at("center"), "circle center");
    g.radius = j.at("radius").get<double>();
    g.count = j.at("count").get<int>();
    g.phase = j.value("phase", 0.0);
  } else if (kind == "follow") {
    g.kind = GoalSpec::Kind::Follow;
    g.object_ids = j.at("object_ids").get<std::vector<int>>();
    g.offset = j.contains("offset") ? vec2_at(j.at("offset"), "follow offset") : Vec2{0.0, 0.0};
  } else if (kind == "herd") {
    g.kind = GoalSpec::Kind::Herd;
    g.object_ids = j.at("object_ids").get<std::vector<int>>();
    g.region_id = j.at("region_id").get<int>();
    g.d_behind = j.value("d_behind", 0.7);
  } else {
    throw PlanParseError("unknown goal kind '" + kind + "'");
  }
  return g;
}

nlohmann::json goals_to_json(const GoalSpec& g) {
  nlohmann::json j;
  switch (g.kind) {
    case GoalSpec::Kind::Points: {
      j["kind"] = "points";
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : g.points) pts.push_back({p.x(), p.y()});
      j["points"] = std::move(pts);
      break;
    }
    case GoalSpec::Kind::Line:
      j["kind"] = "line";
      j["from"] = {g.from.x(), g.from.y()};
      j["to"] = {g.to.x(), g.to.y()};
      j["count"] = g.count;
      break;
    case GoalSpec::Kind::Circle:
      j["kind"] = "circle";
      j["center"] = {g.center.x(), g.center.y()};
      j["radius"] = g.radius;
      j["count"] = g.count;
      j["phase"] = g.phase;
      break;
    case GoalSpec::Kind::Follow:
      j["kind"] = "follow";
      j["object_ids"] = g.object_ids;
      j["offset"] = {g.offset.x(), g.offset.y()};
      break;
    case GoalSpec::Kind::Herd:
      j["kind"] = "herd";
      j["object_ids"] = g.object_ids;
      j["region_id"] = g.region_id;
      j["d_behind"] = g.d_behind;
      break;
  }
  return j;
}

bt::ActionType primitive_from_string(const std::string& s) {
  if (s == "visit_points") return bt::ActionType::VisitPoints;
  if (s == "follow_targets") return bt::ActionType::FollowTargets;
  if (s == "herd") return bt::ActionType::Herd;
  throw PlanParseError("unknown primitive '" + s + "'");
}

ExecutionPlan execution_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "meta_call") {
    MetaCall call;
    call.primitive = primitive_from_string(j.at("primitive").get<std::string>());
    call.goals = goals_from_json(j.at("goals"));
    const std::string alloc = j.value("allocation", std::string{"default"});
    if (alloc == "default") call.allocation = Allocation::Default;
    else if (alloc == "min_conflict") call.allocation = Allocation::MinConflict;
    else throw PlanParseError("unknown allocation '" + alloc + "'");
    if (j.contains("speed_cap") && !j.at("speed_cap").is_null())
      call.speed_cap = j.at("speed_cap").get<double>();
    call.avoid_region_ids = j.value("avoid_region_ids", std::vector<int>{});
    return call;
  }
  if (type == "waypoints") {
    WaypointProgram prog;
    for (const auto& [key, route] : j.at("routes").items()) {
      std::vector<Waypoint> wps;
      for (const auto& w : route) {
        Waypoint wp;
        wp.point = vec2_at(w.at("point"), "waypoint");
        wp.speed_cap = w.value("speed_cap", 1.0);
        wps.push_back(wp);
      }
      prog.routes[std::stoi(key)] = std::move(wps);
    }
    return prog;
  }
  if (type == "parametric") {
    ParametricProgram prog;
    for (const auto& [key, p] : j.at("paths").items()) {
      ParametricPath path;
      try {
        path.x_expr = dsl::parse_expr(p.at("x").get<std::string>());
        path.y_expr = dsl::parse_expr(p.at("y").get<std::string>());
      } catch (const dsl::DslError& e) {
        throw PlanParseError(std::string("parametric path for robot ") + key + ": " + e.what());
      }
      if (path.x_expr->type != dsl::Type::Num || path.y_expr->type != dsl::Type::Num)
        throw PlanParseError("parametric path expressions must be numeric");
      path.t_start = p.at("t_start").get<double>();
      path.t_end = p.at("t_end").get<double>();
      path.samples = p.at("samples").get<int>();
      path.speed_cap = p.value("speed_cap", 1.0);
      prog.paths[std::stoi(key)] = std::move(path);
    }
    return prog;
  }
  throw PlanParseError("unknown execution type '" + type + "'");
}

nlohmann::json execution_to_json(const ExecutionPlan& plan) {
  nlohmann::json j;
  if (const auto* call = std::get_if<MetaCall>(&plan)) {
    j["type"] = "meta_call";
    j["primitive"] = bt::to_string(call->primitive);
    j["goals"] = goals_to_json(call->goals);
    j["allocation"] = call->allocation == Allocation::Default ? "default" : "min_conflict";
    if (call->speed_cap) j["speed_cap"] = *call->speed_cap;
    j["avoid_region_ids"] = call->avoid_region_ids;
  } else if (const auto* prog = std::get_if<WaypointProgram>(&plan)) {
    j["type"] = "waypoints";
    nlohmann::json routes = nlohmann::json::object();
    for (const auto& [id, wps] : prog->routes) {
      nlohmann::json route = nlohmann::json::array();
      for (const auto& wp : wps)
        route.push_back({{"point", {wp.point.x(), wp.point.y()}}, {"speed_cap", wp.speed_cap}});
      routes[std::to_string(id)] = std::move(route);
    }
    j["routes"] = std::move(routes);
  } else {
    const auto& par = std::get<ParametricProgram>(plan);
    j["type"] = "parametric";
    nlohmann::json paths = nlohmann::json::object();
    for (const auto& [id, path] : par.paths) {
      paths[std::to_string(id)] = {{"x", dsl::print_expr(path.x_expr)},
                                   {"y", dsl::print_expr(path.y_expr)},
                                   {"t_start", path.t_start},
                                   {"t_end", path.t_end},
                                   {"samples", path.samples},
                                   {"speed_cap", path.speed_cap}};
    }
    j["paths"] = std::move(paths);
  }
  return j;
}

void append(std::vector<std::string>& diags, const std::vector<std::string>& more) {
  diags.insert(diags.end(), more.begin(), more.end());
}

void validate_plan(const PlanDoc& doc, const PlanBindings& b, std::vector<std::string>& diags) {
  auto in_list = [](const std::vector<int>& list, int id) {
    return std::find(list.begin(), list.end(), id) != list.end();
  };

  if (const auto* call = std::get_if<MetaCall>(&doc.execution)) {
    if (b.action_type && call->primitive != *b.action_type)
      diags.push_back("meta_call primitive " + bt::to_string(call->primitive) +
                      " does not match the node's action_type " + bt::to_string(*b.action_type));
    if (call->speed_cap && *call->speed_cap <= 0.0)
      diags.push_back("speed_cap must be > 0");
    for (int rid : call->avoid_region_ids)
      if (!b.world_ids.regions.count(rid))
        diags.push_back("avoid_region_ids: unresolved region id " + std::to_string(rid));
    const GoalSpec& g = call->goals;
    switch (g.kind) {
      case GoalSpec::Kind::Points:
        if (g.points.empty()) diags.push_back("goals.points must be nonempty");
        break;
      case GoalSpec::Kind::Line:
        if (g.count < 1) diags.push_back("line formation count must be >= 1");
        break;
      case GoalSpec::Kind::Circle:
        if (g.count < 1) diags.push_back("circle formation count must be >= 1");
        if (g.radius <= 0.0) diags.push_back("circle formation radius must be > 0");
        break;
      case GoalSpec::Kind::Follow:
      case GoalSpec::Kind::Herd:
        for (int oid : g.object_ids) {
          if (!b.world_ids.objects.count(oid))
            diags.push_back("goals: unresolved object id " + std::to_string(oid));
          else if (!b.object_ids.empty() && !in_list(b.object_ids, oid))
            diags.push_back("goals: object id " + std::to_string(oid) +
                            " is not bound to this node");
        }
        if (g.kind == GoalSpec::Kind::Herd) {
          if (!b.world_ids.regions.count(g.region_id))
            diags.push_back("goals: unresolved region id " + std::to_string(g.region_id));
          if (g.d_behind <= 0.0) diags.push_back("herd d_behind must be > 0");
        }
        break;
    }
  } else if (const auto* prog = std::get_if<WaypointProgram>(&doc.execution)) {
    if (prog->routes.empty()) diags.push_back("waypoint routes must be nonempty");
    for (const auto& [rid, wps] : prog->routes) {
      if (!b.world_ids.robots.count(rid))
        diags.push_back("routes: unresolved robot id " + std::to_string(rid));
      else if (!b.robot_ids.empty() && !in_list(b.robot_ids, rid))
        diags.push_back("routes: robot id " + std::to_string(rid) +
                        " is not bound to this node");
      if (wps.empty()) diags.push_back("route for robot " + std::to_string(rid) + " is empty");
      for (const auto& wp : wps) {
        if (!finite(wp.point))
          diags.push_back("route for robot " + std::to_string(rid) + " has a non-finite point");
        if (wp.speed_cap <= 0.0)
          diags.push_back("route for robot " + std::to_string(rid) +
                          " has a non-positive speed_cap");
      }
    }
  } else {
    const auto& par = std::get<ParametricProgram>(doc.execution);
    if (par.paths.empty()) diags.push_back("parametric paths must be nonempty");
    for (const auto& [rid, path] : par.paths) {
      if (!b.world_ids.robots.count(rid))
        diags.push_back("paths: unresolved robot id " + std::to_string(rid));
      else if (!b.robot_ids.empty() && !in_list(b.robot_ids, rid))
        diags.push_back("paths: robot id " + std::to_string(rid) + " is not bound to this node");
      if (path.samples < 2) diags.push_back("parametric samples must be >= 2");
      if (!(path.t_end > path.t_start)) diags.push_back("parametric t_end must exceed t_start");
      if (path.speed_cap <= 0.0) diags.push_back("parametric speed_cap must be > 0");
    }
  }

  append(diags, dsl::check_entity_ids(doc.trigger, b.world_ids));
  append(diags, dsl::check_entity_ids(doc.finish, b.world_ids));
}

}  // namespace

dsl::ExprPtr false_expr() {
  static const dsl::ExprPtr expr = dsl::parse_condition("1 == 0");
  return expr;
}

PlanDoc parse_plan(const std::string& text, const PlanBindings& bindings) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw PlanParseError(std::string("plan is not valid JSON: ") + e.what());
  }

  PlanDoc doc;
  doc.node_idx = bindings.node_idx;
  std::vector<std::string> diags;
  try {
    if (!j.contains("execution")) throw PlanParseError("plan lacks an 'execution' section");
    doc.execution = execution_from_json(j.at("execution"));
  } catch (const nlohmann::json::exception& e) {
    throw PlanParseError(std::string("malformed execution section: ") + e.what());
  }

  const std::string trigger_text =
      j.contains("trigger") && j.at("trigger").is_string() ? j.at("trigger").get<std::string>()
                                                           : std::string{};
  try {
    doc.trigger = trigger_text.empty() ? false_expr() : dsl::parse_condition(trigger_text);
  } catch (const dsl::DslError& e) {
    throw PlanParseError(std::string("trigger: ") + e.what());
  }

  if (!j.contains("finish") || !j.at("finish").is_string() ||
      j.at("finish").get<std::string>().empty())
    throw PlanParseError("plan lacks a 'finish' condition");
  try {
    doc.finish = dsl::parse_condition(j.at("finish").get<std::string>());
  } catch (const dsl::DslError& e) {
    throw PlanParseError(std::string("finish: ") + e.what());
  }

  validate_plan(doc, bindings, diags);
  if (!diags.empty()) {
    std::ostringstream msg;
    msg << "plan validation failed:";
    for (const auto& d : diags) msg << "\n  - " << d;
    throw PlanParseError(msg.str());
  }
  return doc;
}

nlohmann::json plan_to_json(const PlanDoc& doc) {
  nlohmann::json j;
  j["execution"] = execution_to_json(doc.execution);
  j["trigger"] = dsl::expr_equal(doc.trigger, false_expr()) ? "" : dsl::print_expr(doc.trigger);
  j["finish"] = dsl::print_expr(doc.finish);
  return j;
}

std::vector<Waypoint> sample_parametric(const ParametricPath& path) {
  if (path.samples < 2) throw PlanParseError("parametric samples must be >= 2");
  if (!(path.t_end > path.t_start)) throw PlanParseError("parametric t_end must exceed t_start");
  std::vector<Waypoint> out;
  out.reserve(static_cast<size_t>(path.samples));
  dsl::EvalContext ctx;  // worldless: only t and math functions are legal here
  for (int k = 0; k < path.samples; ++k) {
    const double t =
        path.t_start + static_cast<double>(k) * (path.t_end - path.t_start) / (path.samples - 1);
    ctx.t = t;
    Waypoint wp;
    wp.point = Vec2{dsl::eval_num(path.x_expr, ctx), dsl::eval_num(path.y_expr, ctx)};
    wp.speed_cap = path.speed_cap;
    out.push_back(wp);
  }
  return out;
}

}  // namespace mrplan::plan
