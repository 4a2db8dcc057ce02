#include "mrplan/orchestrator.hpp"

#include "mrplan/prompts_gen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace mrplan::orchestrate {

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  lib.templates_ = prompts::builtin_templates();
  return lib;
}

PromptLibrary PromptLibrary::from_dir(const std::string& dir) {
  PromptLibrary lib = builtin();
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream buf;
    buf << in.rdbuf();
    lib.templates_[entry.path().stem().string()] = buf.str();
  }
  return lib;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& slots) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) throw StageError("unknown prompt template '" + name + "'");
  std::string out = it->second;
  for (const auto& [key, value] : slots) {
    const std::string slot = "{{" + key + "}}";
    size_t pos = 0;
    while ((pos = out.find(slot, pos)) != std::string::npos) {
      out.replace(pos, slot.size(), value);
      pos += value.size();
    }
  }
  return out;
}

const TaskClause* DependencyAnalysis::find_task(const std::string& label) const {
  for (const auto& t : tasks)
    if (t.label == label) return &t;
  return nullptr;
}

nlohmann::json dep_to_json(const DependencyAnalysis& dep) {
  nlohmann::json j;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : dep.tasks) j["tasks"].push_back(task_to_json(t));
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : dep.edges) j["edges"].push_back({a, b});
  return j;
}

DependencyAnalysis dep_from_json(const nlohmann::json& j) {
  DependencyAnalysis dep;
  try {
    for (const auto& t : j.at("tasks")) dep.tasks.push_back(task_from_json(t));
    if (j.contains("edges"))
      for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2)
          throw MissionParseError("edges entries must be [before, after] pairs");
        dep.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
  } catch (const nlohmann::json::exception& e) {
    throw MissionParseError(std::string("malformed dependency analysis: ") + e.what());
  }
  return dep;
}

std::vector<std::string> validate_dependencies(const DependencyAnalysis& dep) {
  std::vector<std::string> diags;
  if (dep.tasks.empty()) diags.push_back("dependency analysis has no tasks");
  std::set<std::string> labels;
  for (const auto& t : dep.tasks) {
    if (t.label.empty()) diags.push_back("task with empty label");
    if (!labels.insert(t.label).second) diags.push_back("duplicate task label '" + t.label + "'");
    if (t.finish.empty()) diags.push_back("task '" + t.label + "' has an empty finish criterion");
  }
  std::map<std::string, std::vector<std::string>> adj;
  std::map<std::string, int> indeg;
  for (const auto& t : dep.tasks) indeg[t.label] = 0;
  for (const auto& [a, b] : dep.edges) {
    if (!labels.count(a)) diags.push_back("edge references unknown task '" + a + "'");
    if (!labels.count(b)) diags.push_back("edge references unknown task '" + b + "'");
    if (labels.count(a) && labels.count(b)) {
      adj[a].push_back(b);
      indeg[b] += 1;
    }
  }
  // Kahn's algorithm for the DAG check.
  std::queue<std::string> q;
  for (const auto& [label, d] : indeg)
    if (d == 0) q.push(label);
  size_t visited = 0;
  std::map<std::string, int> degree = indeg;
  while (!q.empty()) {
    const std::string cur = q.front();
    q.pop();
    ++visited;
    for (const auto& nxt : adj[cur])
      if (--degree[nxt] == 0) q.push(nxt);
  }
  if (visited != indeg.size()) diags.push_back("dependency edges contain a cycle");
  return diags;
}

std::string render_mission_context(const MissionSpec& spec) {
  if (spec.standardized) return standardized_to_json(*spec.standardized).dump(2);
  nlohmann::json j;
  j["raw_text"] = spec.raw_text;
  j["world"] = world_to_json(spec.world);
  return j.dump(2);
}

namespace {

std::string diagnostics_slot(const std::string& error) {
  if (error.empty()) return "";
  return "\nYour previous attempt failed validation:\n" + error + "\nFix these problems.";
}

// Shared repair loop: 1 initial call + up to max_repairs repair calls, each
// repair prompt carrying the previous diagnostics. Validation failures are
// recorded in the transcript; exhausting the attempts throws StageError.
template <typename T>
T run_stage(Pipeline& p, const std::string& stage,
            const std::function<std::string(const std::string& diagnostics)>& make_prompt,
            const std::function<T(const std::string& response)>& parse_and_validate) {
  std::string last_error;
  for (int attempt = 0; attempt <= p.max_repairs; ++attempt) {
    const std::string prompt = make_prompt(diagnostics_slot(last_error));
    const Completion c = p.provider.complete(stage, prompt);
    TranscriptRecord rec;
    rec.stage = stage;
    rec.prompt = prompt;
    rec.response = c.response;
    rec.usage = c.usage;
    rec.attempt = attempt;
    try {
      T value = parse_and_validate(c.response);
      rec.validation_ok = true;
      p.transcript.add(std::move(rec));
      return value;
    } catch (const std::exception& e) {
      rec.validation_ok = false;
      rec.error = e.what();
      last_error = e.what();
      p.transcript.add(std::move(rec));
    }
  }
  throw StageError("stage '" + stage + "' failed after " + std::to_string(1 + p.max_repairs) +
                   " attempts: " + last_error);
}

nlohmann::json parse_json_response(const std::string& response) {
  try {
    return nlohmann::json::parse(response);
  } catch (const nlohmann::json::parse_error& e) {
    throw MissionParseError(std::string("response is not valid JSON: ") + e.what());
  }
}

void require_clean(std::vector<std::string> diags) {
  if (diags.empty()) return;
  std::ostringstream msg;
  for (size_t i = 0; i < diags.size(); ++i) {
    if (i) msg << "\n";
    msg << "- " << diags[i];
  }
  throw MissionParseError(msg.str());
}

}  // namespace

StandardizedMission standardize(Pipeline& p, const std::string& raw_text,
                                const WorldState& world) {
  auto make_prompt = [&](const std::string& diags) {
    return p.prompts.render(kStageStandardize, {{"raw_text", raw_text},
                                                {"world", world_to_json(world).dump(2)},
                                                {"diagnostics", diags}});
  };
  auto parse = [&](const std::string& response) {
    const StandardizedMission s = standardized_from_json(parse_json_response(response));
    require_clean(validate_spec(s, world));
    return s;
  };
  return run_stage<StandardizedMission>(p, kStageStandardize, make_prompt, parse);
}

DependencyAnalysis extract_tasks(Pipeline& p, const MissionSpec& spec) {
  auto make_prompt = [&](const std::string& diags) {
    return p.prompts.render(kStageDependency,
                            {{"mission", render_mission_context(spec)}, {"diagnostics", diags}});
  };
  auto parse = [&](const std::string& response) {
    const DependencyAnalysis dep = dep_from_json(parse_json_response(response));
    require_clean(validate_dependencies(dep));
    return dep;
  };
  return run_stage<DependencyAnalysis>(p, kStageDependency, make_prompt, parse);
}

DependencyAnalysis update_dependencies(Pipeline& p, const MissionSpec& spec,
                                       const DependencyAnalysis& current,
                                       const std::string& fired_task_label) {
  if (!current.find_task(fired_task_label))
    throw StageError("update_dependencies: fired task '" + fired_task_label +
                     "' is not in the current analysis");
  auto make_prompt = [&](const std::string& diags) {
    return p.prompts.render(kStageDependencyUpdate,
                            {{"mission", render_mission_context(spec)},
                             {"fired_task", fired_task_label},
                             {"dependencies", dep_to_json(current).dump(2)},
                             {"diagnostics", diags}});
  };
  auto parse = [&](const std::string& response) {
    const DependencyAnalysis dep = dep_from_json(parse_json_response(response));
    std::vector<std::string> diags = validate_dependencies(dep);
    if (dep.find_task(fired_task_label))
      diags.push_back("fired task '" + fired_task_label + "' must be removed");
    require_clean(std::move(diags));
    return dep;
  };
  return run_stage<DependencyAnalysis>(p, kStageDependencyUpdate, make_prompt, parse);
}

namespace {

// Every dependency edge (a, b) must be realized structurally: the lowest
// common ancestor of the two action nodes is a Sequence with a's subtree
// strictly before b's.
std::vector<std::string> check_tree_against_deps(const bt::Tree& tree,
                                                 const DependencyAnalysis& dep) {
  std::vector<std::string> diags;
  std::map<std::string, std::vector<int>> actions_by_name;
  std::function<void(const bt::Node&)> walk = [&](const bt::Node& n) {
    if (n.is_action()) actions_by_name[n.task_name].push_back(n.idx);
    for (const auto& c : n.children) walk(c);
  };
  walk(tree.root());

  for (const auto& t : dep.tasks) {
    const auto it = actions_by_name.find(t.label);
    if (it == actions_by_name.end())
      diags.push_back("task '" + t.label + "' has no Action node in the tree");
    else if (it->second.size() > 1)
      diags.push_back("task '" + t.label + "' maps to multiple Action nodes");
  }
  for (const auto& [name, idxs] : actions_by_name)
    if (!dep.find_task(name))
      diags.push_back("Action node '" + name + "' does not correspond to any task");

  for (const auto& [before, after] : dep.edges) {
    const auto a = actions_by_name.find(before);
    const auto b = actions_by_name.find(after);
    if (a == actions_by_name.end() || b == actions_by_name.end()) continue;
    const auto path_a = tree.path_to(a->second.front());
    const auto path_b = tree.path_to(b->second.front());
    size_t common = 0;
    while (common < path_a.size() && common < path_b.size() &&
           path_a[common]->idx == path_b[common]->idx)
      ++common;
    if (common == 0 || common == path_a.size() || common == path_b.size()) {
      diags.push_back("edge (" + before + ", " + after + ") is not realized by the tree");
      continue;
    }
    const bt::Node* lca = path_a[common - 1];
    if (lca->node_type != bt::NodeType::Sequence) {
      diags.push_back("edge (" + before + ", " + after +
                      ") requires a Sequence ancestor, found " + bt::to_string(lca->node_type));
      continue;
    }
    int pos_a = -1, pos_b = -1;
    for (size_t k = 0; k < lca->children.size(); ++k) {
      if (&lca->children[k] == path_a[common]) pos_a = static_cast<int>(k);
      if (&lca->children[k] == path_b[common]) pos_b = static_cast<int>(k);
    }
    if (pos_a >= pos_b)
      diags.push_back("edge (" + before + ", " + after + ") is ordered backwards in the tree");
  }
  return diags;
}

}  // namespace

bt::Tree build_tree(Pipeline& p, const MissionSpec& spec, const DependencyAnalysis& dep) {
  auto make_prompt = [&](const std::string& diags) {
    return p.prompts.render(kStageTree, {{"mission", render_mission_context(spec)},
                                         {"dependencies", dep_to_json(dep).dump(2)},
                                         {"diagnostics", diags}});
  };
  auto parse = [&](const std::string& response) {
    const bt::Tree tree = bt::tree_from_json(parse_json_response(response));
    std::vector<std::string> diags = bt::validate_tree(tree);
    std::function<void(const bt::Node&)> check_idle = [&](const bt::Node& n) {
      if (n.status != bt::NodeStatus::Idle)
        diags.push_back("node " + std::to_string(n.idx) + " must start Idle");
      for (const auto& c : n.children) check_idle(c);
    };
    check_idle(tree.root());
    for (auto& d : check_tree_against_deps(tree, dep)) diags.push_back(std::move(d));
    // Action bindings must resolve against the world.
    const dsl::WorldIds ids = dsl::WorldIds::from(spec.world);
    std::function<void(const bt::Node&)> check_ids = [&](const bt::Node& n) {
      if (n.is_action()) {
        for (int id : n.robot_ids)
          if (!ids.robots.count(id))
            diags.push_back("node " + std::to_string(n.idx) + ": unresolved robot id " +
                            std::to_string(id));
        for (int id : n.object_ids)
          if (!ids.objects.count(id))
            diags.push_back("node " + std::to_string(n.idx) + ": unresolved object id " +
                            std::to_string(id));
        for (int id : n.region_ids)
          if (!ids.regions.count(id))
            diags.push_back("node " + std::to_string(n.idx) + ": unresolved region id " +
                            std::to_string(id));
      }
      for (const auto& c : n.children) check_ids(c);
    };
    check_ids(tree.root());
    require_clean(std::move(diags));
    return tree;
  };
  return run_stage<bt::Tree>(p, kStageTree, make_prompt, parse);
}

std::vector<int> select_ready(Pipeline& p, const bt::Tree& tree) {
  const std::vector<int> expected = bt::ready_actions(tree);
  if (expected.empty()) return {};  // nothing to propose; the engine is authoritative

  std::string last_error;
  for (int attempt = 0; attempt <= 1; ++attempt) {
    const std::string prompt =
        p.prompts.render(kStageSelect, {{"tree", bt::to_json(tree).dump(2)},
                                        {"diagnostics", diagnostics_slot(last_error)}});
    const Completion c = p.provider.complete(kStageSelect, prompt);
    TranscriptRecord rec;
    rec.stage = kStageSelect;
    rec.prompt = prompt;
    rec.response = c.response;
    rec.usage = c.usage;
    rec.attempt = attempt;
    try {
      const nlohmann::json j = parse_json_response(c.response);
      std::vector<int> proposal = j.at("ready").get<std::vector<int>>();
      std::sort(proposal.begin(), proposal.end());
      if (proposal != expected) {
        std::ostringstream msg;
        msg << "proposal [";
        for (size_t i = 0; i < proposal.size(); ++i) msg << (i ? ", " : "") << proposal[i];
        msg << "] does not match the executable set [";
        for (size_t i = 0; i < expected.size(); ++i) msg << (i ? ", " : "") << expected[i];
        msg << "]";
        throw MissionParseError(msg.str());
      }
      rec.validation_ok = true;
      p.transcript.add(std::move(rec));
      return expected;
    } catch (const std::exception& e) {
      rec.validation_ok = false;
      rec.error = e.what();
      last_error = e.what();
      p.transcript.add(std::move(rec));
    }
  }
  // Second mismatch: fall back to the deterministic set, discrepancy logged
  // via the failed records above.
  return expected;
}

plan::PlanDoc gen_plan(Pipeline& p, const MissionSpec& spec, const bt::Node& node) {
  plan::PlanBindings bindings;
  bindings.node_idx = node.idx;
  bindings.action_type = node.action_type;
  bindings.robot_ids = node.robot_ids;
  bindings.object_ids = node.object_ids;
  bindings.region_ids = node.region_ids;
  bindings.world_ids = dsl::WorldIds::from(spec.world);

  auto make_prompt = [&](const std::string& diags) {
    return p.prompts.render(kStagePlan, {{"mission", render_mission_context(spec)},
                                         {"node", bt::to_json(node).dump(2)},
                                         {"diagnostics", diags}});
  };
  auto parse = [&](const std::string& response) {
    return plan::parse_plan(response, bindings);
  };
  return run_stage<plan::PlanDoc>(p, kStagePlan, make_prompt, parse);
}

dsl::ExprPtr gen_mission_finish(Pipeline& p, const MissionSpec& spec) {
  const dsl::WorldIds ids = dsl::WorldIds::from(spec.world);
  auto make_prompt = [&](const std::string& diags) {
    return p.prompts.render(kStageMissionFinish,
                            {{"mission", render_mission_context(spec)}, {"diagnostics", diags}});
  };
  auto parse = [&](const std::string& response) {
    const nlohmann::json j = parse_json_response(response);
    if (!j.contains("finish") || !j.at("finish").is_string())
      throw MissionParseError("response lacks a string 'finish' field");
    dsl::ExprPtr expr;
    try {
      expr = dsl::parse_condition(j.at("finish").get<std::string>());
    } catch (const dsl::DslError& e) {
      throw MissionParseError(std::string("finish expression: ") + e.what());
    }
    require_clean(dsl::check_entity_ids(expr, ids));
    return expr;
  };
  return run_stage<dsl::ExprPtr>(p, kStageMissionFinish, make_prompt, parse);
}

UsageSummary account(const Transcript& transcript, const PriceConfig& prices) {
  UsageSummary out;
  for (const auto& rec : transcript.records) {
    out.input_tokens += rec.usage.input_tokens;
    out.output_tokens += rec.usage.output_tokens;
    if (!rec.validation_ok) out.errors += 1;
  }
  out.cost = static_cast<double>(out.input_tokens) * prices.per_input_token +
             static_cast<double>(out.output_tokens) * prices.per_output_token;
  if (out.errors > 0)
    out.tokens_per_error = static_cast<double>(out.output_tokens) / out.errors;
  return out;
}

nlohmann::json to_json(const UsageSummary& u) {
  nlohmann::json j;
  j["input_tokens"] = u.input_tokens;
  j["output_tokens"] = u.output_tokens;
  j["cost"] = u.cost;
  j["errors"] = u.errors;
  j["tokens_per_error"] = u.tokens_per_error ? nlohmann::json(*u.tokens_per_error)
                                             : nlohmann::json(nullptr);
  return j;
}

}  // namespace mrplan::orchestrate
