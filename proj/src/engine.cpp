#include "mrplan/engine.hpp"

#include "mrplan/behaviors.hpp"
#include "mrplan/btree.hpp"
#include "mrplan/dsl.hpp"
#include "mrplan/plan.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace mrplan::engine {

std::string to_string(Event::Kind k) {
  switch (k) {
    case Event::Kind::TriggerFired: return "trigger_fired";
    case Event::Kind::ActionFinished: return "action_finished";
    case Event::Kind::CompositeFinished: return "composite_finished";
    case Event::Kind::MissionFinished: return "mission_finished";
    case Event::Kind::Timeout: return "timeout";
    case Event::Kind::Unreachable: return "unreachable";
  }
  return "?";
}

std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Completed: return "Completed";
    case FinishReason::Timeout: return "Timeout";
    case FinishReason::IrreparableFailure: return "IrreparableFailure";
  }
  return "?";
}

nlohmann::json to_json(const MissionReport& r) {
  nlohmann::json j;
  j["mission_id"] = r.mission_id;
  j["success"] = r.success;
  j["reason"] = to_string(r.reason);
  j["ticks"] = r.ticks;
  j["sim_time"] = r.sim_time;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["template_mode"] = r.template_mode;
  j["trace_digest"] = r.trace_digest;
  j["usage"] = orchestrate::to_json(r.usage);
  if (!r.failure_detail.empty()) j["failure_detail"] = r.failure_detail;
  j["events"] = nlohmann::json::array();
  for (const auto& e : r.events) {
    nlohmann::json ev;
    ev["kind"] = to_string(e.kind);
    ev["node_idx"] = e.node_idx;
    ev["tick"] = e.tick;
    ev["time"] = e.time;
    if (!e.detail.empty()) ev["detail"] = e.detail;
    j["events"].push_back(std::move(ev));
  }
  return j;
}

namespace {

using behaviors::GoalSet;
using behaviors::PaddedProblem;

// Drives the robots of one Running action node: installs waypoint routes at
// activation and maintains them each tick (per-tick goal regeneration for
// follow/herd, deferred-goal refills for visit_points).
class NodeExecutor {
 public:
  NodeExecutor(const bt::Node& node, plan::PlanDoc doc, double start_time)
      : node_(node), doc_(std::move(doc)), start_time_(start_time) {}

  int node_idx() const { return node_.idx; }
  const plan::PlanDoc& doc() const { return doc_; }
  double start_time() const { return start_time_; }
  const std::vector<int>& robot_ids() const { return node_.robot_ids; }

  void activate(WorldState& world, const EngineOptions& opts) {
    if (const auto* call = std::get_if<plan::MetaCall>(&doc_.execution)) {
      resolve_avoid_regions(world, call->avoid_region_ids);
      if (call->goals.kind == plan::GoalSpec::Kind::Follow ||
          call->goals.kind == plan::GoalSpec::Kind::Herd) {
        retarget_per_tick(world, *call, opts);
      } else {
        static_goals_ = build_static_goals(call->goals);
        assign_static(world, *call, opts);
      }
    } else if (const auto* prog = std::get_if<plan::WaypointProgram>(&doc_.execution)) {
      for (int rid : node_.robot_ids)
        if (RobotState* r = world.find_robot(rid)) r->waypoint_queue.clear();
      for (const auto& [rid, route] : prog->routes) {
        RobotState* r = world.find_robot(rid);
        if (!r) throw ValidationError("plan routes unknown robot " + std::to_string(rid));
        r->waypoint_queue.assign(route.begin(), route.end());
      }
    } else {
      const auto& par = std::get<plan::ParametricProgram>(doc_.execution);
      for (int rid : node_.robot_ids)
        if (RobotState* r = world.find_robot(rid)) r->waypoint_queue.clear();
      for (const auto& [rid, path] : par.paths) {
        RobotState* r = world.find_robot(rid);
        if (!r) throw ValidationError("plan paths unknown robot " + std::to_string(rid));
        const auto wps = plan::sample_parametric(path);
        r->waypoint_queue.assign(wps.begin(), wps.end());
      }
    }
  }

  void tick(WorldState& world, const EngineOptions& opts) {
    const auto* call = std::get_if<plan::MetaCall>(&doc_.execution);
    if (!call) return;
    if (call->goals.kind == plan::GoalSpec::Kind::Follow ||
        call->goals.kind == plan::GoalSpec::Kind::Herd) {
      retarget_per_tick(world, *call, opts);
      return;
    }
    // Static goals: hand deferred goals to robots that have gone idle.
    if (deferred_.empty()) return;
    for (int rid : participants_) {
      if (deferred_.empty()) break;
      RobotState* r = world.find_robot(rid);
      if (!r || !r->waypoint_queue.empty()) continue;
      const int goal_idx = deferred_.front();
      deferred_.erase(deferred_.begin());
      route_robot(world, *r, static_goals_.goals[static_cast<size_t>(goal_idx)], *call, opts);
    }
  }

 private:
  static GoalSet build_static_goals(const plan::GoalSpec& spec) {
    switch (spec.kind) {
      case plan::GoalSpec::Kind::Points:
        return behaviors::gen_visit_points(spec.points);
      case plan::GoalSpec::Kind::Line:
        return behaviors::gen_visit_points(
            behaviors::LineFormation{spec.from, spec.to, spec.count});
      case plan::GoalSpec::Kind::Circle:
        return behaviors::gen_visit_points(
            behaviors::CircleFormation{spec.center, spec.radius, spec.count, spec.phase});
      default:
        throw ValidationError("goal spec is not static");
    }
  }

  void resolve_avoid_regions(const WorldState& world, const std::vector<int>& ids) {
    avoid_.clear();
    for (int rid : ids) {
      const Region* r = world.find_region(rid);
      if (!r) throw ValidationError("avoid region " + std::to_string(rid) + " unknown");
      avoid_.push_back(*r);
    }
  }

  double cap_for(const RobotState& robot, const plan::MetaCall& call) const {
    return call.speed_cap ? std::min(*call.speed_cap, robot.max_speed) : robot.max_speed;
  }

  void route_robot(WorldState& world, RobotState& robot, const Vec2& goal,
                   const plan::MetaCall& call, const EngineOptions& opts) {
    (void)world;
    const double cap = cap_for(robot, call);
    if (avoid_.empty()) {
      robot.waypoint_queue.assign(1, Waypoint{goal, cap});
      return;
    }
    const auto route =
        behaviors::plan_path(robot.position, goal, avoid_, opts.path_resolution, cap,
                             opts.path_inflation);
    robot.waypoint_queue.assign(route.begin(), route.end());
  }

  void assign_static(WorldState& world, const plan::MetaCall& call, const EngineOptions& opts) {
    const PaddedProblem padded = behaviors::pad_goals(node_.robot_ids, world, static_goals_);
    participants_ = padded.robot_ids;
    deferred_ = padded.deferred_goals;
    behaviors::Assignment assignment;
    if (call.allocation == plan::Allocation::MinConflict)
      assignment = behaviors::allocate_min_conflict(padded.robot_ids, padded.robot_positions,
                                                    padded.goals);
    else
      assignment = behaviors::allocate_default(padded.robot_ids, padded.goals);
    for (int rid : padded.stay_robot_ids)
      if (RobotState* r = world.find_robot(rid)) r->waypoint_queue.clear();
    for (const auto& [rid, goal_idx] : assignment) {
      RobotState* r = world.find_robot(rid);
      route_robot(world, *r, padded.goals.goals[static_cast<size_t>(goal_idx)], call, opts);
    }
  }

  void retarget_per_tick(WorldState& world, const plan::MetaCall& call,
                         const EngineOptions& opts) {
    GoalSet goals;
    if (call.goals.kind == plan::GoalSpec::Kind::Follow) {
      goals = behaviors::gen_follow_targets(call.goals.object_ids, call.goals.offset, world);
    } else {
      const Region* region = world.find_region(call.goals.region_id);
      if (!region)
        throw ValidationError("herd region " + std::to_string(call.goals.region_id) + " unknown");
      goals = behaviors::gen_herd(call.goals.object_ids, *region, call.goals.d_behind, world);
    }
    const PaddedProblem padded = behaviors::pad_goals(node_.robot_ids, world, goals);
    behaviors::Assignment assignment;
    if (call.allocation == plan::Allocation::MinConflict)
      assignment = behaviors::allocate_min_conflict(padded.robot_ids, padded.robot_positions,
                                                    padded.goals);
    else
      assignment = behaviors::allocate_default(padded.robot_ids, padded.goals);
    for (int rid : padded.stay_robot_ids)
      if (RobotState* r = world.find_robot(rid)) r->waypoint_queue.clear();
    for (const auto& [rid, goal_idx] : assignment) {
      RobotState* r = world.find_robot(rid);
      route_robot(world, *r, padded.goals.goals[static_cast<size_t>(goal_idx)], call, opts);
    }
  }

  bt::Node node_;
  plan::PlanDoc doc_;
  double start_time_ = 0.0;
  std::vector<Region> avoid_;
  GoalSet static_goals_;
  std::vector<int> participants_;
  std::vector<int> deferred_;
};

struct CompositeWatcher {
  int idx = 0;
  dsl::ExprPtr condition;
};

void collect_action_idxs(const bt::Node& n, std::vector<int>& out) {
  if (n.is_action()) {
    out.push_back(n.idx);
    return;
  }
  for (const auto& c : n.children) collect_action_idxs(c, out);
}

std::vector<CompositeWatcher> collect_watchers(const bt::Tree& tree, const WorldState& world) {
  std::vector<CompositeWatcher> out;
  const dsl::WorldIds ids = dsl::WorldIds::from(world);
  std::function<void(const bt::Node&)> walk = [&](const bt::Node& n) {
    if (!n.is_action() && !n.finish_condition.empty()) {
      try {
        dsl::ExprPtr expr = dsl::parse_condition(n.finish_condition);
        if (dsl::check_entity_ids(expr, ids).empty())
          out.push_back({n.idx, std::move(expr)});
      } catch (const dsl::DslError&) {
        // Natural-language composite conditions fall back to completion by
        // child propagation.
      }
    }
    for (const auto& c : n.children) walk(c);
  };
  walk(tree.root());
  return out;
}

class MissionRun {
 public:
  MissionRun(const MissionSpec& spec, Provider& provider, const sim::SimConfig& cfg,
             const EngineOptions& opts)
      : spec_(spec),
        cfg_(cfg),
        opts_(opts),
        prompts_(opts.prompts ? *opts.prompts : default_prompts()),
        pipeline_{provider, transcript_, prompts_} {}

  MissionReport run() {
    const auto wall_start = std::chrono::steady_clock::now();
    report_.mission_id = spec_.mission_id;
    report_.template_mode = opts_.use_template;

    world_ = spec_.world;
    finalize_world(world_, cfg_.cell_size);

    std::vector<std::string> diags = validate_world(world_);
    for (const auto& d : sim::validate_config(cfg_)) diags.push_back(d);
    if (!diags.empty()) {
      fail_irreparable("mission invalid: " + join(diags));
      return finalize(wall_start);
    }

    try {
      analyze();
      tick_loop();
    } catch (const std::exception& e) {
      fail_irreparable(e.what());
    }
    return finalize(wall_start);
  }

 private:
  static const orchestrate::PromptLibrary& default_prompts() {
    static const orchestrate::PromptLibrary lib = orchestrate::PromptLibrary::builtin();
    return lib;
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (i) out += "; ";
      out += parts[i];
    }
    return out;
  }

  void analyze() {
    spec_run_ = spec_;
    spec_run_.world = world_;
    if (opts_.use_template) {
      if (!spec_run_.standardized)
        spec_run_.standardized = orchestrate::standardize(pipeline_, spec_.raw_text, world_);
    } else {
      spec_run_.standardized.reset();  // ablation: raw-text path
    }
    dep_ = orchestrate::extract_tasks(pipeline_, spec_run_);
    tree_ = orchestrate::build_tree(pipeline_, spec_run_, dep_);
    watchers_ = collect_watchers(tree_, world_);
    mission_finish_ = orchestrate::gen_mission_finish(pipeline_, spec_run_);
    plan_ready_nodes();
  }

  void remove_task(const std::string& label) {
    dep_.tasks.erase(std::remove_if(dep_.tasks.begin(), dep_.tasks.end(),
                                    [&](const TaskClause& t) { return t.label == label; }),
                     dep_.tasks.end());
    dep_.edges.erase(std::remove_if(dep_.edges.begin(), dep_.edges.end(),
                                    [&](const auto& e) {
                                      return e.first == label || e.second == label;
                                    }),
                     dep_.edges.end());
  }

  void clear_all_queues() {
    for (auto& r : world_.robots) r.waypoint_queue.clear();
  }

  void drop_executor(int idx) {
    const auto it = std::find_if(executors_.begin(), executors_.end(),
                                 [&](const auto& e) { return e->node_idx() == idx; });
    if (it == executors_.end()) return;
    for (int rid : (*it)->robot_ids())
      if (RobotState* r = world_.find_robot(rid)) r->waypoint_queue.clear();
    executors_.erase(it);
  }

  // Selection + plan generation for every newly ready node. Plan failures
  // mark the node Failure and trigger a mission-level replan.
  void plan_ready_nodes() {
    while (true) {
      const std::vector<int> selected = orchestrate::select_ready(pipeline_, tree_);
      if (selected.empty()) return;
      bt::mark_running(tree_, selected);
      bool replan = false;
      for (int idx : selected) {
        const bt::Node* node = tree_.find(idx);
        try {
          plan::PlanDoc doc = orchestrate::gen_plan(pipeline_, spec_run_, *node);
          auto exec = std::make_unique<NodeExecutor>(*node, std::move(doc), world_.time);
          exec->activate(world_, opts_);
          executors_.push_back(std::move(exec));
          std::sort(executors_.begin(), executors_.end(),
                    [](const auto& a, const auto& b) { return a->node_idx() < b->node_idx(); });
        } catch (const behaviors::UnreachableError& e) {
          push_event(Event::Kind::Unreachable, idx, e.what());
          tree_.find(idx)->status = bt::NodeStatus::Failure;
          replan = true;
          break;
        } catch (const orchestrate::StageError& e) {
          push_event(Event::Kind::Unreachable, idx, e.what());
          tree_.find(idx)->status = bt::NodeStatus::Failure;
          replan = true;
          break;
        }
      }
      if (!replan) return;
      rebuild_tree();
    }
  }

  // Mission-level replan: regenerate the tree over the remaining work.
  void rebuild_tree() {
    if (++rebuilds_ > opts_.max_tree_rebuilds)
      throw orchestrate::StageError("tree rebuild budget exhausted (" +
                                    std::to_string(opts_.max_tree_rebuilds) + ")");
    clear_all_queues();
    executors_.clear();
    tree_ = orchestrate::build_tree(pipeline_, spec_run_, dep_);
    watchers_ = collect_watchers(tree_, world_);
  }

  void push_event(Event::Kind kind, int node_idx, std::string detail = {}) {
    Event e;
    e.kind = kind;
    e.node_idx = node_idx;
    e.tick = tick_;
    e.time = world_.time;
    e.detail = std::move(detail);
    report_.events.push_back(e);
    tick_event_notes_.push_back(to_string(kind) +
                                (node_idx >= 0 ? " node " + std::to_string(node_idx) : ""));
  }

  dsl::EvalContext eval_ctx(double node_start_time) const {
    dsl::EvalContext ctx;
    ctx.world = &world_;
    ctx.node_start_time = node_start_time;
    ctx.mission_tasks_done = tree_.root().status == bt::NodeStatus::Success;
    return ctx;
  }

  bool handle_trigger() {
    for (const auto& exec : executors_) {
      const bt::Node* node = tree_.find(exec->node_idx());
      if (!node || node->status != bt::NodeStatus::Running) continue;
      if (node->trigger_condition.empty()) continue;
      if (!dsl::eval_bool(exec->doc().trigger, eval_ctx(exec->start_time()))) continue;

      push_event(Event::Kind::TriggerFired, node->idx);
      const std::string fired_label = bt::apply_trigger_fired(tree_, node->idx);
      // Hold position globally while the replan runs.
      executors_.clear();
      clear_all_queues();
      dep_ = orchestrate::update_dependencies(pipeline_, spec_run_, dep_, fired_label);
      if (++rebuilds_ > opts_.max_tree_rebuilds)
        throw orchestrate::StageError("tree rebuild budget exhausted (" +
                                      std::to_string(opts_.max_tree_rebuilds) + ")");
      tree_ = orchestrate::build_tree(pipeline_, spec_run_, dep_);
      watchers_ = collect_watchers(tree_, world_);
      plan_ready_nodes();
      return true;
    }
    return false;
  }

  bool handle_finishes() {
    bool any = false;
    // Action finish conditions, ascending node idx.
    std::vector<int> finished;
    for (const auto& exec : executors_) {
      const bt::Node* node = tree_.find(exec->node_idx());
      if (!node || node->status != bt::NodeStatus::Running) continue;
      if (dsl::eval_bool(exec->doc().finish, eval_ctx(exec->start_time())))
        finished.push_back(exec->node_idx());
    }
    for (int idx : finished) {
      push_event(Event::Kind::ActionFinished, idx);
      const bt::Node* node = tree_.find(idx);
      const std::string label = node->task_name;
      const std::vector<int> flipped = bt::apply_action_finish(tree_, idx);
      drop_executor(idx);
      remove_task(label);
      for (int comp : flipped) push_event(Event::Kind::CompositeFinished, comp);
      any = true;
    }
    // Composite early-finish conditions.
    for (const auto& watcher : watchers_) {
      const bt::Node* node = tree_.find(watcher.idx);
      if (!node || node->status != bt::NodeStatus::Running) continue;
      if (!dsl::eval_bool(watcher.condition, eval_ctx(0.0))) continue;
      push_event(Event::Kind::CompositeFinished, watcher.idx,
                 "finish condition met before all children completed");
      std::vector<int> actions;
      collect_action_idxs(*node, actions);
      bt::apply_composite_finish(tree_, watcher.idx);
      for (int idx : actions) {
        const bt::Node* action = tree_.find(idx);
        drop_executor(idx);
        remove_task(action->task_name);
      }
      any = true;
    }
    return any;
  }

  void tick_loop() {
    for (tick_ = 0; tick_ < cfg_.max_ticks; ++tick_) {
      tick_event_notes_.clear();

      if (dsl::eval_bool(mission_finish_, eval_ctx(0.0))) {
        push_event(Event::Kind::MissionFinished, -1);
        report_.success = true;
        report_.reason = FinishReason::Completed;
        report_.ticks = tick_;
        return;
      }

      if (!handle_trigger()) {
        if (handle_finishes()) plan_ready_nodes();
      }

      for (const auto& exec : executors_) exec->tick(world_, opts_);

      sim::TraceTick record;
      record.tick = tick_;
      for (const auto& r : world_.robots)
        record.targets[r.id] = r.waypoint_queue.empty()
                                   ? std::optional<Waypoint>{}
                                   : std::optional<Waypoint>{r.waypoint_queue.front()};

      sim::TickOutcome outcome = sim::step(world_, cfg_);
      world_ = std::move(outcome.world);
      hasher_.mix_tick(world_);

      record.time = world_.time;
      for (const auto& r : world_.robots) record.robot_positions[r.id] = r.position;
      for (const auto& o : world_.objects) record.object_positions[o.id] = o.position;
      for (const auto& [rid, grid] : world_.coverage) record.coverage[rid] = grid.fraction();
      record.events = tick_event_notes_;
      for (const auto& ev : outcome.events) record.events.push_back(sim::to_string(ev));
      trace_.push_back(std::move(record));
    }
    push_event(Event::Kind::Timeout, -1);
    report_.success = false;
    report_.reason = FinishReason::Timeout;
    report_.ticks = cfg_.max_ticks;
  }

  void fail_irreparable(const std::string& detail) {
    report_.success = false;
    report_.reason = FinishReason::IrreparableFailure;
    report_.failure_detail = detail;
    report_.ticks = tick_;
  }

  MissionReport finalize(std::chrono::steady_clock::time_point wall_start) {
    report_.sim_time = world_.time;
    report_.usage = orchestrate::account(transcript_, opts_.prices);
    report_.trace_digest = hasher_.digest();
    report_.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    write_outputs();
    return report_;
  }

  void write_outputs() {
    if (opts_.out_dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(opts_.out_dir);
    {
      std::ofstream out(fs::path(opts_.out_dir) / "report.json");
      out << to_json(report_).dump(2) << "\n";
    }
    {
      std::ofstream out(fs::path(opts_.out_dir) / "trace.jsonl");
      nlohmann::json header;
      header["type"] = "header";
      header["mission_id"] = spec_.mission_id;
      header["config"] = {{"dt", cfg_.dt},
                          {"waypoint_tolerance", cfg_.waypoint_tolerance},
                          {"max_ticks", cfg_.max_ticks},
                          {"sense_radius", cfg_.sense_radius},
                          {"cell_size", cfg_.cell_size},
                          {"seed", cfg_.seed}};
      WorldState initial = spec_.world;
      finalize_world(initial, cfg_.cell_size);
      header["world"] = world_to_json(initial);
      out << header.dump() << "\n";
      for (const auto& t : trace_) out << sim::to_json(t).dump() << "\n";
      nlohmann::json footer;
      footer["type"] = "footer";
      footer["digest"] = report_.trace_digest;
      footer["ticks"] = static_cast<long>(trace_.size());
      out << footer.dump() << "\n";
    }
    {
      std::ofstream out(fs::path(opts_.out_dir) / "transcript.jsonl");
      for (const auto& rec : transcript_.records) out << mrplan::to_json(rec).dump() << "\n";
    }
    if (opts_.plot) {
      WorldState initial = spec_.world;
      finalize_world(initial, cfg_.cell_size);
      write_trajectory_svg((fs::path(opts_.out_dir) / "plot.svg").string(), initial, trace_);
      if (!initial.coverage.empty())
        write_coverage_svg((fs::path(opts_.out_dir) / "coverage.svg").string(), trace_);
    }
  }

  const MissionSpec& spec_;
  sim::SimConfig cfg_;
  EngineOptions opts_;
  const orchestrate::PromptLibrary& prompts_;
  Transcript transcript_;
  orchestrate::Pipeline pipeline_;

  MissionSpec spec_run_;
  WorldState world_;
  orchestrate::DependencyAnalysis dep_;
  bt::Tree tree_;
  std::vector<CompositeWatcher> watchers_;
  dsl::ExprPtr mission_finish_;
  std::vector<std::unique_ptr<NodeExecutor>> executors_;
  std::vector<sim::TraceTick> trace_;
  std::vector<std::string> tick_event_notes_;
  sim::TraceHasher hasher_;
  MissionReport report_;
  long tick_ = 0;
  int rebuilds_ = 0;
};

}  // namespace

MissionReport run_mission(const MissionSpec& spec, Provider& provider,
                          const sim::SimConfig& sim_config, const EngineOptions& options) {
  MissionRun run(spec, provider, sim_config, options);
  return run.run();
}

namespace {

nlohmann::json parse_line(const std::string& line, long lineno) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("trace line " + std::to_string(lineno) + " is not valid JSON: " +
                             e.what());
  }
}

}  // namespace

ReplayVerdict replay(const std::string& trace_path) {
  std::ifstream in(trace_path);
  if (!in) return {false, -1, "cannot open trace: " + trace_path};

  std::string line;
  long lineno = 0;
  nlohmann::json header;
  std::vector<sim::TraceTick> ticks;
  std::string recorded_digest;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const nlohmann::json j = parse_line(line, lineno);
      const std::string type = j.value("type", std::string{});
      if (type == "header") header = j;
      else if (type == "tick") ticks.push_back(sim::trace_tick_from_json(j));
      else if (type == "footer") recorded_digest = j.value("digest", std::string{});
    }
  } catch (const std::exception& e) {
    return {false, -1, e.what()};
  }
  if (header.is_null() || !header.contains("world"))
    return {false, -1, "trace has no header record"};

  sim::SimConfig cfg;
  const auto& c = header.at("config");
  cfg.dt = c.value("dt", cfg.dt);
  cfg.waypoint_tolerance = c.value("waypoint_tolerance", cfg.waypoint_tolerance);
  cfg.max_ticks = c.value("max_ticks", cfg.max_ticks);
  cfg.sense_radius = c.value("sense_radius", cfg.sense_radius);
  cfg.cell_size = c.value("cell_size", cfg.cell_size);
  cfg.seed = c.value("seed", cfg.seed);

  WorldState world;
  try {
    world = world_from_json(header.at("world"));
    finalize_world(world, cfg.cell_size);
  } catch (const std::exception& e) {
    return {false, -1, std::string("trace header world invalid: ") + e.what()};
  }

  sim::TraceHasher hasher;
  for (const auto& t : ticks) {
    std::map<int, std::deque<Waypoint>> queues;
    for (const auto& [rid, wp] : t.targets)
      if (wp) queues[rid].push_back(*wp);
    const sim::TickOutcome outcome = sim::step(world, cfg, queues);
    world = outcome.world;
    hasher.mix_tick(world);

    if (world.time != t.time)
      return {false, t.tick, "clock diverged at tick " + std::to_string(t.tick)};
    for (const auto& r : world.robots) {
      const auto it = t.robot_positions.find(r.id);
      if (it == t.robot_positions.end() || it->second.x() != r.position.x() ||
          it->second.y() != r.position.y())
        return {false, t.tick,
                "robot " + std::to_string(r.id) + " diverged at tick " + std::to_string(t.tick)};
    }
    for (const auto& o : world.objects) {
      const auto it = t.object_positions.find(o.id);
      if (it == t.object_positions.end() || it->second.x() != o.position.x() ||
          it->second.y() != o.position.y())
        return {false, t.tick,
                "object " + std::to_string(o.id) + " diverged at tick " + std::to_string(t.tick)};
    }
    for (const auto& [rid, fraction] : t.coverage) {
      if (world.coverage_fraction(rid) != fraction)
        return {false, t.tick,
                "coverage of region " + std::to_string(rid) + " diverged at tick " +
                    std::to_string(t.tick)};
    }
  }

  if (!recorded_digest.empty() && hasher.digest() != recorded_digest)
    return {false, -1, "digest mismatch: " + hasher.digest() + " vs " + recorded_digest};
  return {true, -1, "trace verified (" + std::to_string(ticks.size()) + " ticks)"};
}

namespace {

struct SvgMapper {
  double min_x = 0, min_y = 0, max_x = 1, max_y = 1;
  double width = 760, height = 760, margin = 20;

  void include(const Vec2& p) {
    min_x = std::min(min_x, p.x());
    min_y = std::min(min_y, p.y());
    max_x = std::max(max_x, p.x());
    max_y = std::max(max_y, p.y());
  }
  double sx(double x) const {
    return margin + (x - min_x) / std::max(1e-9, max_x - min_x) * width;
  }
  double sy(double y) const {
    return margin + height - (y - min_y) / std::max(1e-9, max_y - min_y) * height;
  }
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#e377c2"};

}  // namespace

void write_trajectory_svg(const std::string& path, const WorldState& initial,
                          const std::vector<sim::TraceTick>& ticks) {
  SvgMapper map;
  bool first = true;
  auto seed = [&](const Vec2& p) {
    if (first) {
      map.min_x = map.max_x = p.x();
      map.min_y = map.max_y = p.y();
      first = false;
    } else {
      map.include(p);
    }
  };
  for (const auto& r : initial.robots) seed(r.position);
  for (const auto& o : initial.objects) seed(o.position);
  for (const auto& region : initial.regions) {
    Vec2 lo, hi;
    region_bounds(region, lo, hi);
    seed(lo);
    seed(hi);
  }
  for (const auto& t : ticks) {
    for (const auto& [id, p] : t.robot_positions) seed(p);
    for (const auto& [id, p] : t.object_positions) seed(p);
  }
  const double pad = 0.05 * std::max(map.max_x - map.min_x, map.max_y - map.min_y) + 0.5;
  map.min_x -= pad;
  map.min_y -= pad;
  map.max_x += pad;
  map.max_y += pad;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
         "viewBox=\"0 0 800 800\">\n";
  svg << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";

  for (const auto& region : initial.regions) {
    const char* fill = region.kind == RegionKind::Forbidden ? "#f4cccc"
                       : region.kind == RegionKind::Target  ? "#d9ead3"
                                                            : "#eeeeee";
    const char* stroke = region.kind == RegionKind::Forbidden ? "#cc0000" : "#6aa84f";
    if (region.is_circle()) {
      const auto& c = region.circle();
      const double rx = map.sx(c.center.x() + c.radius) - map.sx(c.center.x());
      svg << "<circle cx=\"" << map.sx(c.center.x()) << "\" cy=\"" << map.sy(c.center.y())
          << "\" r=\"" << rx << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\" stroke-width=\"1.5\"/>\n";
    } else {
      svg << "<polygon points=\"";
      for (const auto& v : region.polygon().vertices)
        svg << map.sx(v.x()) << "," << map.sy(v.y()) << " ";
      svg << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"/>\n";
    }
    svg << "<text x=\"" << map.sx(region_centroid(region).x()) << "\" y=\""
        << map.sy(region_centroid(region).y()) << "\" font-size=\"11\" fill=\"#555\">"
        << region.name << "</text>\n";
  }

  size_t color = 0;
  for (const auto& r : initial.robots) {
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 8]
        << "\" stroke-width=\"1.5\" points=\"";
    svg << map.sx(r.position.x()) << "," << map.sy(r.position.y()) << " ";
    for (const auto& t : ticks) {
      const auto it = t.robot_positions.find(r.id);
      if (it != t.robot_positions.end())
        svg << map.sx(it->second.x()) << "," << map.sy(it->second.y()) << " ";
    }
    svg << "\"/>\n";
    svg << "<circle cx=\"" << map.sx(r.position.x()) << "\" cy=\"" << map.sy(r.position.y())
        << "\" r=\"4\" fill=\"" << kPalette[color % 8] << "\"/>\n";
    svg << "<text x=\"" << map.sx(r.position.x()) + 6 << "\" y=\"" << map.sy(r.position.y())
        << "\" font-size=\"11\">r" << r.id << "</text>\n";
    ++color;
  }
  for (const auto& o : initial.objects) {
    svg << "<polyline fill=\"none\" stroke=\"#444444\" stroke-dasharray=\"4 3\" "
           "stroke-width=\"1.2\" points=\"";
    svg << map.sx(o.position.x()) << "," << map.sy(o.position.y()) << " ";
    for (const auto& t : ticks) {
      const auto it = t.object_positions.find(o.id);
      if (it != t.object_positions.end())
        svg << map.sx(it->second.x()) << "," << map.sy(it->second.y()) << " ";
    }
    svg << "\"/>\n";
    svg << "<rect x=\"" << map.sx(o.position.x()) - 3 << "\" y=\"" << map.sy(o.position.y()) - 3
        << "\" width=\"6\" height=\"6\" fill=\"#444444\"/>\n";
    svg << "<text x=\"" << map.sx(o.position.x()) + 6 << "\" y=\"" << map.sy(o.position.y())
        << "\" font-size=\"11\">o" << o.id << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  out << svg.str();
}

void write_coverage_svg(const std::string& path, const std::vector<sim::TraceTick>& ticks) {
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" "
         "viewBox=\"0 0 800 400\">\n";
  out << "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";
  out << "<line x1=\"40\" y1=\"360\" x2=\"780\" y2=\"360\" stroke=\"#333\"/>\n";
  out << "<line x1=\"40\" y1=\"20\" x2=\"40\" y2=\"360\" stroke=\"#333\"/>\n";
  if (ticks.empty()) {
    out << "</svg>\n";
    return;
  }
  std::set<int> region_ids;
  for (const auto& [rid, f] : ticks.front().coverage) region_ids.insert(rid);
  size_t color = 0;
  for (int rid : region_ids) {
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 8]
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t k = 0; k < ticks.size(); ++k) {
      const auto it = ticks[k].coverage.find(rid);
      if (it == ticks[k].coverage.end()) continue;
      const double x = 40.0 + 740.0 * static_cast<double>(k) / std::max<size_t>(1, ticks.size() - 1);
      const double y = 360.0 - 340.0 * it->second;
      out << x << "," << y << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"50\" y=\"" << 30 + 14 * color << "\" font-size=\"12\" fill=\""
        << kPalette[color % 8] << "\">region " << rid << "</text>\n";
    ++color;
  }
  out << "<text x=\"700\" y=\"380\" font-size=\"12\">ticks</text>\n";
  out << "<text x=\"8\" y=\"30\" font-size=\"12\">coverage</text>\n";
  out << "</svg>\n";
}

}  // namespace engine
