#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mrplan/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <httplib.h>

#include <atomic>
#include <thread>

using namespace mrplan;
using namespace mrplan::orchestrate;
using nlohmann::json;

namespace {

MissionSpec demo_spec() {
  MissionSpec spec;
  spec.mission_id = "demo";
  spec.raw_text = "Robots 1, 2 and 3 each visit one of the points (1,1), (2,2) and (3,3).";
  spec.world.robots.push_back({1, Vec2{0, 0}, 1.0, {}, 0.0});
  spec.world.robots.push_back({2, Vec2{1, 0}, 1.0, {}, 0.0});
  spec.world.robots.push_back({3, Vec2{2, 0}, 1.0, {}, 0.0});
  Region pen;
  pen.id = 0;
  pen.name = "pen";
  pen.shape = Circle{Vec2{8, 0}, 1.0};
  pen.kind = RegionKind::Target;
  spec.world.regions.push_back(pen);
  return spec;
}

json task(const std::string& label, const std::string& finish = "1 == 0") {
  return {{"label", label},      {"description", label}, {"constraints", json::array()},
          {"trigger", ""},       {"finish", finish},     {"hints", json::array()}};
}

json playbook_entry(const std::string& stage, const json& response) {
  return {{"stage", stage}, {"response", response}};
}

struct Fixture {
  Transcript transcript;
  PromptLibrary prompts = PromptLibrary::builtin();

  Pipeline pipeline(Provider& p) { return Pipeline{p, transcript, prompts}; }
};

}  // namespace

TEST_CASE("scripted provider consumes per-stage queues in order") {
  json playbook;
  playbook["entries"] = json::array({
      playbook_entry("tree", json("first tree")),
      playbook_entry("plan", json("first plan")),
      playbook_entry("tree", json("second tree")),
  });
  playbook["annotation"] = {{"expect", "success"}};
  ScriptedProvider p = ScriptedProvider::from_json(playbook);
  CHECK(p.annotation().at("expect") == "success");
  CHECK_FALSE(p.exhausted());

  // String responses pass through verbatim (structured ones are dumped).
  CHECK(p.complete("tree", "x").response == "first tree");
  CHECK(p.complete("plan", "y").response == "first plan");
  CHECK(p.complete("tree", "z").response == "second tree");
  CHECK(p.exhausted());
  CHECK_THROWS_AS(p.complete("tree", "w"), ProviderError);
  CHECK_THROWS_AS(p.complete("select", "w"), ProviderError);
}

TEST_CASE("scripted provider usage defaults and overrides") {
  json playbook;
  json with_usage = playbook_entry("plan", json("ok"));
  with_usage["usage"] = {{"input_tokens", 120}, {"output_tokens", 45}};
  playbook["entries"] = json::array({with_usage, playbook_entry("plan", json("ok2"))});
  ScriptedProvider p = ScriptedProvider::from_json(playbook);

  const Completion c1 = p.complete("plan", "prompt");
  CHECK(c1.usage.input_tokens == 120);
  CHECK(c1.usage.output_tokens == 45);

  const Completion c2 = p.complete("plan", std::string(40, 'x'));
  CHECK(c2.usage.input_tokens == 10);  // ceil(40/4)
  CHECK(c2.usage.output_tokens == estimate_tokens(c2.response));
}

TEST_CASE("standardize with repair loop records retries") {
  const MissionSpec spec = demo_spec();
  json good;
  good["overview"] = "three robots visit three points";
  good["team"] = json::array({{{"id", 1}, {"position", {0, 0}}, {"max_speed", 1.0}}});
  good["objects"] = json::array();
  good["regions"] = json::array();
  good["tasks"] = json::array({task("visit_all", "dist(robot(1), point(1,1)) < 0.1")});
  good["mission_finish"] = "all points visited";
  good["hints"] = json::array();

  json playbook;
  playbook["entries"] = json::array({
      playbook_entry("standardize", json("{ this is not json")),
      playbook_entry("standardize", json({{"overview", "missing tasks"}})),
      playbook_entry("standardize", good),
  });
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);

  const StandardizedMission s = standardize(p, spec.raw_text, spec.world);
  CHECK(s.tasks.size() == 1);
  REQUIRE(fx.transcript.records.size() == 3);
  CHECK_FALSE(fx.transcript.records[0].validation_ok);
  CHECK_FALSE(fx.transcript.records[1].validation_ok);
  CHECK(fx.transcript.records[2].validation_ok);
  CHECK(fx.transcript.records[2].attempt == 2);
  // The repair prompt carries the previous diagnostics.
  CHECK(fx.transcript.records[1].prompt.find("failed validation") != std::string::npos);
}

TEST_CASE("standardize gives up after 1 + 2 attempts") {
  const MissionSpec spec = demo_spec();
  json playbook;
  playbook["entries"] = json::array({
      playbook_entry("standardize", json("bad")),
      playbook_entry("standardize", json("bad")),
      playbook_entry("standardize", json("bad")),
      playbook_entry("standardize", json("never reached")),
  });
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);
  CHECK_THROWS_AS(standardize(p, spec.raw_text, spec.world), StageError);
  CHECK(fx.transcript.records.size() == 3);  // retry bound: 1 + 2
}

TEST_CASE("standardize rejects invented entity ids") {
  const MissionSpec spec = demo_spec();
  json invented;
  invented["overview"] = "x";
  invented["team"] = json::array({{{"id", 42}, {"position", {0, 0}}, {"max_speed", 1.0}}});
  invented["tasks"] = json::array({task("t")});
  invented["mission_finish"] = "done";
  json playbook;
  playbook["entries"] = json::array({playbook_entry("standardize", invented)});
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);
  CHECK_THROWS_AS(standardize(p, spec.raw_text, spec.world), std::exception);
  REQUIRE(!fx.transcript.records.empty());
  CHECK(fx.transcript.records[0].error.find("42") != std::string::npos);
}

TEST_CASE("extract_tasks parses tasks and edges") {
  const MissionSpec spec = demo_spec();

  // Three independent tasks, no edges.
  json dep0;
  dep0["tasks"] = json::array({task("a"), task("b"), task("c")});
  dep0["edges"] = json::array();
  json playbook;
  playbook["entries"] = json::array({playbook_entry("dependency", dep0)});
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);
  const DependencyAnalysis dep = extract_tasks(p, spec);
  CHECK(dep.tasks.size() == 3);
  CHECK(dep.edges.empty());
}

TEST_CASE("extract_tasks repairs a cyclic proposal") {
  const MissionSpec spec = demo_spec();
  json cyclic;
  cyclic["tasks"] = json::array({task("line"), task("visit")});
  cyclic["edges"] = json::array({{"line", "visit"}, {"visit", "line"}});
  json dag = cyclic;
  dag["edges"] = json::array({{"line", "visit"}});

  json playbook;
  playbook["entries"] =
      json::array({playbook_entry("dependency", cyclic), playbook_entry("dependency", dag)});
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);
  const DependencyAnalysis dep = extract_tasks(p, spec);
  REQUIRE(dep.edges.size() == 1);
  CHECK(dep.edges[0].first == "line");
  REQUIRE(fx.transcript.records.size() == 2);
  CHECK_FALSE(fx.transcript.records[0].validation_ok);
  CHECK(fx.transcript.records[0].error.find("cycle") != std::string::npos);
  CHECK(fx.transcript.records[1].attempt == 1);
}

TEST_CASE("update_dependencies removes the fired task") {
  const MissionSpec spec = demo_spec();
  DependencyAnalysis current;
  current.tasks = {TaskClause{"t1", "", {}, "", "1 == 0", {}},
                   TaskClause{"t2", "", {}, "", "1 == 0", {}}};
  current.edges = {{"t1", "t2"}};

  json updated;
  updated["tasks"] = json::array({task("t1"), task("t4")});
  updated["edges"] = json::array({{"t1", "t4"}});

  json playbook;
  playbook["entries"] = json::array({playbook_entry("dependency_update", updated)});
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);
  const DependencyAnalysis dep = update_dependencies(p, spec, current, "t2");
  CHECK(dep.find_task("t2") == nullptr);
  CHECK(dep.find_task("t4") != nullptr);

  // A response that keeps the fired task fails validation.
  json keeps;
  keeps["tasks"] = json::array({task("t1"), task("t2")});
  keeps["edges"] = json::array();
  json playbook2;
  playbook2["entries"] = json::array({playbook_entry("dependency_update", keeps),
                                      playbook_entry("dependency_update", keeps),
                                      playbook_entry("dependency_update", keeps)});
  ScriptedProvider provider2 = ScriptedProvider::from_json(playbook2);
  Fixture fx2;
  Pipeline p2 = fx2.pipeline(provider2);
  CHECK_THROWS_AS(update_dependencies(p2, spec, current, "t2"), StageError);
  CHECK(fx2.transcript.records[0].error.find("must be removed") != std::string::npos);

  // Firing an unknown task is a caller bug.
  Fixture fx3;
  Pipeline p3 = fx3.pipeline(provider2);
  CHECK_THROWS_AS(update_dependencies(p3, spec, current, "zZz"), StageError);
}

namespace {

json action_node(int idx, const std::string& name, const json& robot_ids,
                 const std::string& finish = "1 == 0") {
  return {{"idx", idx},
          {"node_type", "Action"},
          {"task_name", name},
          {"status", "Idle"},
          {"constraints", json::array()},
          {"trigger_condition", ""},
          {"finish_condition", finish},
          {"hints", json::array()},
          {"children", json::array()},
          {"action_type", "visit_points"},
          {"robot_ids", robot_ids},
          {"object_ids", json::array()},
          {"region_ids", json::array()},
          {"points", json::array({{1.0, 1.0}})}};
}

json composite_node(int idx, const std::string& type, const json& children) {
  return {{"idx", idx},
          {"node_type", type},
          {"task_name", "mission"},
          {"status", "Idle"},
          {"constraints", json::array()},
          {"trigger_condition", ""},
          {"finish_condition", ""},
          {"hints", json::array()},
          {"children", children}};
}

}  // namespace

TEST_CASE("build_tree validates structure and dependency consistency") {
  const MissionSpec spec = demo_spec();
  DependencyAnalysis dep;
  dep.tasks = {TaskClause{"a", "", {}, "", "1 == 0", {}},
               TaskClause{"b", "", {}, "", "1 == 0", {}}};

  SUBCASE("independent tasks under a Parallel root") {
    const json tree_json = composite_node(
        0, "Parallel", json::array({action_node(1, "a", {1}), action_node(2, "b", {2})}));
    json playbook;
    playbook["entries"] = json::array({playbook_entry("tree", tree_json)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    const bt::Tree tree = build_tree(p, spec, dep);
    CHECK(tree.root().node_type == bt::NodeType::Parallel);
    CHECK(tree.root().children.size() == 2);
  }

  SUBCASE("a chain requires Sequence ordering") {
    dep.edges = {{"a", "b"}};
    const json good = composite_node(
        0, "Sequence", json::array({action_node(1, "a", {1}), action_node(2, "b", {2})}));
    const json wrong_type = composite_node(
        0, "Parallel", json::array({action_node(1, "a", {1}), action_node(2, "b", {2})}));
    json playbook;
    playbook["entries"] =
        json::array({playbook_entry("tree", wrong_type), playbook_entry("tree", good)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    const bt::Tree tree = build_tree(p, spec, dep);
    CHECK(tree.root().node_type == bt::NodeType::Sequence);
    CHECK_FALSE(fx.transcript.records[0].validation_ok);
    CHECK(fx.transcript.records[0].error.find("Sequence") != std::string::npos);
  }

  SUBCASE("backwards ordering is rejected") {
    dep.edges = {{"a", "b"}};
    const json backwards = composite_node(
        0, "Sequence", json::array({action_node(1, "b", {2}), action_node(2, "a", {1})}));
    json playbook;
    playbook["entries"] = json::array(
        {playbook_entry("tree", backwards), playbook_entry("tree", backwards),
         playbook_entry("tree", backwards)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    CHECK_THROWS_AS(build_tree(p, spec, dep), StageError);
  }

  SUBCASE("action node with children carries the leaf-rule diagnostic into repair") {
    json bad_action = action_node(1, "a", {1});
    bad_action["children"] = json::array({action_node(3, "b", {2})});
    const json bad = composite_node(0, "Parallel", json::array({bad_action}));
    const json good = composite_node(
        0, "Parallel", json::array({action_node(1, "a", {1}), action_node(2, "b", {2})}));
    json playbook;
    playbook["entries"] = json::array({playbook_entry("tree", bad), playbook_entry("tree", good)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    const bt::Tree tree = build_tree(p, spec, dep);
    CHECK(tree.root().children.size() == 2);
    CHECK(fx.transcript.records[0].error.find("children must be empty") != std::string::npos);
    CHECK(fx.transcript.records[1].prompt.find("children must be empty") != std::string::npos);
  }

  SUBCASE("unresolved robot id in bindings") {
    const json bad = composite_node(
        0, "Parallel", json::array({action_node(1, "a", {1}), action_node(2, "b", {77})}));
    json playbook;
    playbook["entries"] =
        json::array({playbook_entry("tree", bad), playbook_entry("tree", bad),
                     playbook_entry("tree", bad)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    CHECK_THROWS_AS(build_tree(p, spec, dep), StageError);
    CHECK(fx.transcript.records[0].error.find("77") != std::string::npos);
  }
}

TEST_CASE("select_ready validates proposals against the deterministic set") {
  bt::Node root;
  root.idx = 0;
  root.node_type = bt::NodeType::Sequence;
  bt::Node a;
  a.idx = 1;
  a.node_type = bt::NodeType::Action;
  a.task_name = "a";
  a.finish_condition = "1 == 0";
  bt::Node b = a;
  b.idx = 2;
  b.task_name = "b";
  root.children = {a, b};
  const bt::Tree tree(root);

  SUBCASE("matching proposal accepted") {
    json playbook;
    playbook["entries"] = json::array({playbook_entry("select", json{{"ready", {1}}})});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    CHECK(select_ready(p, tree) == std::vector<int>{1});
    CHECK(fx.transcript.records.size() == 1);
    CHECK(fx.transcript.records[0].validation_ok);
  }

  SUBCASE("mismatch, repair, then deterministic fallback") {
    json playbook;
    playbook["entries"] = json::array({
        playbook_entry("select", json{{"ready", {2}}}),   // violates Sequence order
        playbook_entry("select", json{{"ready", {1, 2}}}) // still wrong
    });
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    CHECK(select_ready(p, tree) == std::vector<int>{1});  // deterministic fallback
    REQUIRE(fx.transcript.records.size() == 2);
    CHECK_FALSE(fx.transcript.records[0].validation_ok);
    CHECK_FALSE(fx.transcript.records[1].validation_ok);
  }

  SUBCASE("fully terminal tree skips the provider") {
    bt::Tree done = tree;
    done.find(0)->status = bt::NodeStatus::Success;
    done.find(1)->status = bt::NodeStatus::Success;
    done.find(2)->status = bt::NodeStatus::Success;
    json playbook;
    playbook["entries"] = json::array();
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    CHECK(select_ready(p, done).empty());
    CHECK(fx.transcript.records.empty());  // no call issued
  }
}

TEST_CASE("gen_plan compiles and validates a plan document") {
  const MissionSpec spec = demo_spec();
  bt::Node node;
  node.idx = 5;
  node.node_type = bt::NodeType::Action;
  node.task_name = "visit";
  node.action_type = bt::ActionType::VisitPoints;
  node.robot_ids = {1, 2, 3};
  node.finish_condition = "all robots at their points";

  json good_plan = {
      {"execution",
       {{"type", "meta_call"},
        {"primitive", "visit_points"},
        {"goals", {{"kind", "points"}, {"points", {{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}}}},
        {"allocation", "min_conflict"}}},
      {"finish", "all(robots in [1,2,3], dist(robot(i), point(1,1)) < 5)"}};

  SUBCASE("happy path, no trigger means constant-false trigger") {
    json playbook;
    playbook["entries"] = json::array({playbook_entry("plan", good_plan)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    const plan::PlanDoc doc = gen_plan(p, spec, node);
    CHECK(doc.node_idx == 5);
    dsl::EvalContext ctx;
    ctx.world = &spec.world;
    CHECK_FALSE(dsl::eval_bool(doc.trigger, ctx));
    CHECK(std::holds_alternative<plan::MetaCall>(doc.execution));
  }

  SUBCASE("unresolved robot id repairs then succeeds") {
    json bad_plan = good_plan;
    bad_plan["finish"] = "dist(robot(42), point(1,1)) < 5";
    json playbook;
    playbook["entries"] =
        json::array({playbook_entry("plan", bad_plan), playbook_entry("plan", good_plan)});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    const plan::PlanDoc doc = gen_plan(p, spec, node);
    CHECK(doc.node_idx == 5);
    CHECK(fx.transcript.records[0].error.find("42") != std::string::npos);
  }

  SUBCASE("irreparable plan raises StageError after three attempts") {
    json playbook;
    playbook["entries"] = json::array({playbook_entry("plan", json("oops")),
                                       playbook_entry("plan", json("oops")),
                                       playbook_entry("plan", json("oops"))});
    ScriptedProvider provider = ScriptedProvider::from_json(playbook);
    Fixture fx;
    Pipeline p = fx.pipeline(provider);
    CHECK_THROWS_AS(gen_plan(p, spec, node), StageError);
  }
}

TEST_CASE("gen_mission_finish compiles a boolean expression") {
  const MissionSpec spec = demo_spec();
  json playbook;
  playbook["entries"] = json::array(
      {playbook_entry("mission_finish", json{{"finish", "coverage(region(0)) >= 0.6"}})});
  ScriptedProvider provider = ScriptedProvider::from_json(playbook);
  Fixture fx;
  Pipeline p = fx.pipeline(provider);
  const dsl::ExprPtr expr = gen_mission_finish(p, spec);
  CHECK(expr->type == dsl::Type::Bool);

  json playbook2;
  playbook2["entries"] = json::array(
      {playbook_entry("mission_finish", json{{"finish", "1 + 1"}}),
       playbook_entry("mission_finish", json{{"finish", "mission_tasks_done()"}})});
  ScriptedProvider provider2 = ScriptedProvider::from_json(playbook2);
  Fixture fx2;
  Pipeline p2 = fx2.pipeline(provider2);
  CHECK(gen_mission_finish(p2, spec)->type == dsl::Type::Bool);
  CHECK_FALSE(fx2.transcript.records[0].validation_ok);
}

TEST_CASE("account sums usage and counts repair-triggering failures") {
  Transcript t;
  CHECK(account(t).input_tokens == 0);
  CHECK(account(t).output_tokens == 0);
  CHECK(account(t).errors == 0);
  CHECK_FALSE(account(t).tokens_per_error.has_value());

  TranscriptRecord r1;
  r1.stage = "tree";
  r1.usage = {100, 20};
  r1.validation_ok = true;
  TranscriptRecord r2;
  r2.stage = "plan";
  r2.usage = {50, 10};
  r2.validation_ok = true;
  t.add(r1);
  t.add(r2);
  UsageSummary s = account(t);
  CHECK(s.input_tokens == 150);
  CHECK(s.output_tokens == 30);
  CHECK(s.errors == 0);
  CHECK_FALSE(s.tokens_per_error.has_value());  // rendered as a dash downstream
  CHECK(s.cost == 0.0);

  // A failed attempt then its repaired retry: one error, tokens/error uses
  // output tokens only.
  TranscriptRecord bad;
  bad.stage = "plan";
  bad.usage = {400, 70};
  bad.validation_ok = false;
  t.add(bad);
  s = account(t, PriceConfig{0.001, 0.002});
  CHECK(s.input_tokens == 550);
  CHECK(s.output_tokens == 100);
  CHECK(s.errors == 1);
  REQUIRE(s.tokens_per_error.has_value());
  CHECK(*s.tokens_per_error == doctest::Approx(100.0));
  CHECK(s.cost == doctest::Approx(550 * 0.001 + 100 * 0.002));
}

TEST_CASE("prompt library renders slots and honors overrides") {
  const PromptLibrary lib = PromptLibrary::builtin();
  const std::string rendered =
      lib.render("select", {{"tree", "TREE_JSON"}, {"diagnostics", ""}});
  CHECK(rendered.find("TREE_JSON") != std::string::npos);
  CHECK(rendered.find("{{tree}}") == std::string::npos);
  CHECK_THROWS_AS(lib.render("nope", {}), StageError);
}

TEST_CASE("http provider speaks the chat-completions protocol") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const json body = json::parse(req.body);
    CHECK(body.at("model") == "test-model");
    CHECK(req.get_header_value("Authorization") == "Bearer sk-test");
    json reply;
    reply["choices"] = json::array(
        {{{"message", {{"role", "assistant"}, {"content", "{\"ready\": [1]}"}}}}});
    reply["usage"] = {{"prompt_tokens", 321}, {"completion_tokens", 17}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  LiveProviderConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "test-model";
  cfg.api_key = "sk-test";
  HttpProvider provider(cfg);
  const Completion c = provider.complete("select", "prompt text");
  CHECK(c.response == "{\"ready\": [1]}");
  CHECK(c.usage.input_tokens == 321);
  CHECK(c.usage.output_tokens == 17);
  CHECK(hits == 1);

  server.stop();
  th.join();

  CHECK_THROWS_AS(HttpProvider(LiveProviderConfig{}), ProviderError);
}
