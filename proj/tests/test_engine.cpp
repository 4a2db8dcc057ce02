#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mrplan/engine.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace mrplan;
using namespace mrplan::engine;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

json task(const std::string& label, const std::string& finish) {
  return {{"label", label},      {"description", label}, {"constraints", json::array()},
          {"trigger", ""},       {"finish", finish},     {"hints", json::array()}};
}

json action_node(int idx, const std::string& name, const json& robot_ids, const json& points,
                 const std::string& trigger = "") {
  return {{"idx", idx},
          {"node_type", "Action"},
          {"task_name", name},
          {"status", "Idle"},
          {"constraints", json::array()},
          {"trigger_condition", trigger},
          {"finish_condition", "see plan"},
          {"hints", json::array()},
          {"children", json::array()},
          {"action_type", "visit_points"},
          {"robot_ids", robot_ids},
          {"object_ids", json::array()},
          {"region_ids", json::array()},
          {"points", points}};
}

json composite_node(int idx, const std::string& type, const json& children,
                    const std::string& finish = "") {
  return {{"idx", idx},
          {"node_type", type},
          {"task_name", "mission"},
          {"status", "Idle"},
          {"constraints", json::array()},
          {"trigger_condition", ""},
          {"finish_condition", finish},
          {"hints", json::array()},
          {"children", children}};
}

json visit_plan(const json& points, const std::string& finish, const std::string& trigger = "",
                const json& avoid = json::array()) {
  json p = {{"execution",
             {{"type", "meta_call"},
              {"primitive", "visit_points"},
              {"goals", {{"kind", "points"}, {"points", points}}},
              {"allocation", "default"},
              {"avoid_region_ids", avoid}}},
            {"finish", finish}};
  if (!trigger.empty()) p["trigger"] = trigger;
  return p;
}

json entry(const std::string& stage, const json& response) {
  return {{"stage", stage}, {"response", response}};
}

MissionSpec one_robot_spec() {
  MissionSpec spec;
  spec.mission_id = "unit";
  spec.raw_text = "Robot 1 visits (1, 0) and then (2, 0).";
  spec.world.robots.push_back({1, Vec2{0, 0}, 1.0, {}, 0.0});
  spec.sim_config.max_ticks = 500;
  return spec;
}

json standardized_for(const MissionSpec& spec, const json& tasks) {
  json s;
  s["overview"] = spec.raw_text;
  s["team"] = json::array();
  for (const auto& r : spec.world.robots)
    s["team"].push_back(
        {{"id", r.id}, {"position", {r.position.x(), r.position.y()}}, {"max_speed", r.max_speed}});
  s["objects"] = json::array();
  s["regions"] = json::array();
  s["tasks"] = tasks;
  s["mission_finish"] = "all tasks complete";
  s["hints"] = json::array();
  return s;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mrplan_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("sequence mission runs to completion with template standardization") {
  const MissionSpec spec = one_robot_spec();
  const json tasks = json::array({task("go_first", "dist(robot(1), point(1,0)) < 0.05"),
                                  task("go_second", "dist(robot(1), point(2,0)) < 0.05")});

  json playbook;
  playbook["entries"] = json::array({
      entry("standardize", standardized_for(spec, tasks)),
      entry("dependency",
            {{"tasks", tasks},
             {"edges", json::array({json::array({"go_first", "go_second"})})}}),
      entry("tree",
            composite_node(0, "Sequence",
                           json::array({action_node(1, "go_first", {1}, {{1.0, 0.0}}),
                                        action_node(2, "go_second", {1}, {{2.0, 0.0}})}))),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {1}}}),
      entry("plan", visit_plan({{1.0, 0.0}}, "dist(robot(1), point(1,0)) < 0.05")),
      entry("select", {{"ready", {2}}}),
      entry("plan", visit_plan({{2.0, 0.0}}, "dist(robot(1), point(2,0)) < 0.05")),
  });

  TempDir tmp;
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions opts;
  opts.out_dir = tmp.path.string();
  opts.plot = true;
  const MissionReport report = run_mission(spec, provider, spec.sim_config, opts);

  CHECK(report.success);
  CHECK(report.reason == FinishReason::Completed);
  CHECK(report.template_mode);
  CHECK(report.ticks == 21);  // 10 ticks per meter leg, finish seen next tick
  CHECK(provider.exhausted());

  // Event order: first action, then second, then composite + mission finish.
  REQUIRE(report.events.size() >= 4);
  CHECK(report.events[0].kind == Event::Kind::ActionFinished);
  CHECK(report.events[0].node_idx == 1);
  CHECK(report.events[0].tick == 10);
  CHECK(report.events[1].kind == Event::Kind::ActionFinished);
  CHECK(report.events[1].node_idx == 2);
  CHECK(report.events[2].kind == Event::Kind::CompositeFinished);
  CHECK(report.events[2].node_idx == 0);
  CHECK(report.events.back().kind == Event::Kind::MissionFinished);

  // Artifacts exist with stable names.
  CHECK(fs::exists(tmp.path / "report.json"));
  CHECK(fs::exists(tmp.path / "trace.jsonl"));
  CHECK(fs::exists(tmp.path / "transcript.jsonl"));
  CHECK(fs::exists(tmp.path / "plot.svg"));

  // The recorded trace replays bit-exactly.
  const ReplayVerdict verdict = replay((tmp.path / "trace.jsonl").string());
  CHECK(verdict.match);

  // Tampering with one position is caught at that tick.
  std::ifstream in(tmp.path / "trace.jsonl");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  json tampered = json::parse(lines[5]);
  tampered["robots"]["1"][0] = tampered["robots"]["1"][0].get<double>() + 0.001;
  lines[5] = tampered.dump();
  std::ofstream out(tmp.path / "trace_bad.jsonl");
  for (const auto& l : lines) out << l << "\n";
  out.close();
  const ReplayVerdict bad = replay((tmp.path / "trace_bad.jsonl").string());
  CHECK_FALSE(bad.match);
  CHECK(bad.first_divergent_tick == 4);  // line 5 is tick 4 (header first)

  // A trace from a different dt mismatches instead of crashing.
  json header = json::parse(lines[0]);
  header["config"]["dt"] = 0.2;
  lines[0] = header.dump();
  std::ofstream out2(tmp.path / "trace_dt.jsonl");
  for (const auto& l : lines) out2 << l << "\n";
  out2.close();
  CHECK_FALSE(replay((tmp.path / "trace_dt.jsonl").string()).match);
}

TEST_CASE("no-template mode skips standardization and works from raw text") {
  const MissionSpec spec = one_robot_spec();
  const json tasks = json::array({task("go", "dist(robot(1), point(1,0)) < 0.05")});
  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", {{"tasks", tasks}, {"edges", json::array()}}),
      entry("tree", action_node(0, "go", {1}, {{1.0, 0.0}})),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {0}}}),
      entry("plan", visit_plan({{1.0, 0.0}}, "dist(robot(1), point(1,0)) < 0.05")),
  });
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions opts;
  opts.use_template = false;
  TempDir tmp;
  opts.out_dir = tmp.path.string();
  const MissionReport report = run_mission(spec, provider, spec.sim_config, opts);
  CHECK(report.success);
  CHECK_FALSE(report.template_mode);

  // The transcript has no standardize stage record.
  std::ifstream in(tmp.path / "transcript.jsonl");
  std::string line;
  bool saw_standardize = false;
  while (std::getline(in, line))
    if (json::parse(line).at("stage") == "standardize") saw_standardize = true;
  CHECK_FALSE(saw_standardize);
}

TEST_CASE("trigger fires at the kinematically exact tick and replanning recovers") {
  MissionSpec spec;
  spec.mission_id = "trigger_unit";
  spec.raw_text = "Robot 1 heads to (10, 0) but must keep 1 m clearance from the hazard.";
  spec.world.robots.push_back({1, Vec2{0, 0}, 1.0, {}, 0.0});
  Region hazard;
  hazard.id = 0;
  hazard.name = "hazard";
  hazard.shape = Circle{Vec2{6.05, 0}, 1.0};
  hazard.kind = RegionKind::Forbidden;
  spec.world.regions.push_back(hazard);
  spec.sim_config.max_ticks = 2000;

  const json approach_tasks =
      json::array({task("approach", "dist(robot(1), point(10,0)) < 0.05")});
  const json retreat_tasks = json::array({task("retreat", "dist(robot(1), point(0,0)) < 0.05")});

  json approach_node = action_node(1, "approach", {1}, {{10.0, 0.0}},
                                   "dist(robot(1), region(0)) < 1.0");
  approach_node["region_ids"] = {0};

  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", {{"tasks", approach_tasks}, {"edges", json::array()}}),
      entry("tree", composite_node(0, "Sequence", json::array({approach_node}))),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {1}}}),
      entry("plan", visit_plan({{10.0, 0.0}}, "dist(robot(1), point(10,0)) < 0.05",
                               "dist(robot(1), region(0)) < 1.0")),
      entry("dependency_update", {{"tasks", retreat_tasks}, {"edges", json::array()}}),
      entry("tree", composite_node(5, "Sequence",
                                   json::array({action_node(6, "retreat", {1}, {{0.0, 0.0}})}))),
      entry("select", {{"ready", {6}}}),
      entry("plan", visit_plan({{0.0, 0.0}}, "dist(robot(1), point(0,0)) < 0.05")),
  });

  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions raw_opts;
  raw_opts.use_template = false;
  const MissionReport report = run_mission(spec, provider, spec.sim_config, raw_opts);
  CHECK(report.success);

  // Independent kinematics: x_k = k * speed * dt; the boundary distance
  // drops below 1.0 as soon as x > 6.05 - 1 - 1 = 4.05, so tick 41.
  REQUIRE(!report.events.empty());
  CHECK(report.events[0].kind == Event::Kind::TriggerFired);
  CHECK(report.events[0].node_idx == 1);
  CHECK(report.events[0].tick == 41);

  // Exactly one mission-finish generation for the whole run.
  CHECK(provider.exhausted());
}

TEST_CASE("composite early finish fails unfinished children and proceeds") {
  MissionSpec spec;
  spec.mission_id = "composite_unit";
  spec.raw_text = "Two robots sweep until enough time has passed, then stop.";
  spec.world.robots.push_back({1, Vec2{0, 0}, 1.0, {}, 0.0});
  spec.world.robots.push_back({2, Vec2{0, 1}, 1.0, {}, 0.0});
  spec.sim_config.max_ticks = 200;

  const json tasks = json::array({task("sweep_a", "dist(robot(1), point(9,0)) < 0.05"),
                                  task("sweep_b", "dist(robot(2), point(9,1)) < 0.05")});
  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", {{"tasks", tasks}, {"edges", json::array()}}),
      entry("tree", composite_node(0, "Parallel",
                                   json::array({action_node(1, "sweep_a", {1}, {{9.0, 0.0}}),
                                                action_node(2, "sweep_b", {2}, {{9.0, 1.0}})}),
                                   "time() > 0.55")),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {1, 2}}}),
      entry("plan", visit_plan({{9.0, 0.0}}, "dist(robot(1), point(9,0)) < 0.05")),
      entry("plan", visit_plan({{9.0, 1.0}}, "dist(robot(2), point(9,1)) < 0.05")),
  });

  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions raw_opts;
  raw_opts.use_template = false;
  const MissionReport report = run_mission(spec, provider, spec.sim_config, raw_opts);
  CHECK(report.success);
  REQUIRE(!report.events.empty());
  CHECK(report.events[0].kind == Event::Kind::CompositeFinished);
  CHECK(report.events[0].node_idx == 0);
  CHECK(report.events[0].tick == 6);  // first tick with time() > 0.55
  CHECK(report.events[1].kind == Event::Kind::MissionFinished);
  CHECK(report.ticks == 7);
}

TEST_CASE("timeout is reported honestly") {
  MissionSpec spec = one_robot_spec();
  spec.sim_config.max_ticks = 50;
  const json tasks = json::array({task("wait", "1 == 0")});
  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", {{"tasks", tasks}, {"edges", json::array()}}),
      entry("tree", action_node(0, "wait", {1}, json::array())),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {0}}}),
      entry("plan", visit_plan({{1.0, 0.0}}, "1 == 0")),
  });
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions opts;
  opts.use_template = false;
  const MissionReport report = run_mission(spec, provider, spec.sim_config, opts);
  CHECK_FALSE(report.success);
  CHECK(report.reason == FinishReason::Timeout);
  CHECK(report.ticks == 50);
  CHECK(report.events.back().kind == Event::Kind::Timeout);
}

TEST_CASE("irreparable stage folds into the report") {
  MissionSpec spec = one_robot_spec();
  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", json("garbage")),
      entry("dependency", json("garbage")),
      entry("dependency", json("garbage")),
  });
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions opts;
  opts.use_template = false;
  const MissionReport report = run_mission(spec, provider, spec.sim_config, opts);
  CHECK_FALSE(report.success);
  CHECK(report.reason == FinishReason::IrreparableFailure);
  CHECK(report.usage.errors == 3);
  CHECK_FALSE(report.failure_detail.empty());
}

TEST_CASE("unreachable goal marks the node Failure and replans") {
  MissionSpec spec;
  spec.mission_id = "unreachable_unit";
  spec.raw_text = "Robot 1 tries to reach a point inside the keep-out zone.";
  spec.world.robots.push_back({1, Vec2{0, 0}, 1.0, {}, 0.0});
  Region zone;
  zone.id = 0;
  zone.name = "keepout";
  zone.shape = Circle{Vec2{5, 0}, 1.0};
  zone.kind = RegionKind::Forbidden;
  spec.world.regions.push_back(zone);
  spec.sim_config.max_ticks = 100;

  const json tasks = json::array({task("impossible", "dist(robot(1), point(5,0)) < 0.05")});
  json impossible_plan =
      visit_plan({{5.0, 0.0}}, "dist(robot(1), point(5,0)) < 0.05", "", json::array({0}));
  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", {{"tasks", tasks}, {"edges", json::array()}}),
      entry("tree", action_node(0, "impossible", {1}, {{5.0, 0.0}})),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {0}}}),
      entry("plan", impossible_plan),
      // The mission-level replan asks for a fresh tree; nothing is left.
  });
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  EngineOptions opts;
  opts.use_template = false;
  const MissionReport report = run_mission(spec, provider, spec.sim_config, opts);
  CHECK_FALSE(report.success);
  CHECK(report.reason == FinishReason::IrreparableFailure);
  bool saw_unreachable = false;
  for (const auto& e : report.events)
    if (e.kind == Event::Kind::Unreachable) saw_unreachable = true;
  CHECK(saw_unreachable);
}

TEST_CASE("deterministic: identical runs produce identical digests") {
  const MissionSpec spec = one_robot_spec();
  const json tasks = json::array({task("go", "dist(robot(1), point(1,0)) < 0.05")});
  json playbook;
  playbook["entries"] = json::array({
      entry("dependency", {{"tasks", tasks}, {"edges", json::array()}}),
      entry("tree", action_node(0, "go", {1}, {{1.0, 0.0}})),
      entry("mission_finish", {{"finish", "mission_tasks_done()"}}),
      entry("select", {{"ready", {0}}}),
      entry("plan", visit_plan({{1.0, 0.0}}, "dist(robot(1), point(1,0)) < 0.05")),
  });
  EngineOptions opts;
  opts.use_template = false;

  ScriptedProvider p1 = ScriptedProvider::from_json(playbook);
  ScriptedProvider p2 = ScriptedProvider::from_json(playbook);
  const MissionReport r1 = run_mission(spec, p1, spec.sim_config, opts);
  const MissionReport r2 = run_mission(spec, p2, spec.sim_config, opts);
  CHECK(r1.trace_digest == r2.trace_digest);
  CHECK(r1.ticks == r2.ticks);
  CHECK_FALSE(r1.trace_digest.empty());
}
