#include "mrplan/btree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>
#include <set>

namespace mrplan::bt {

std::string to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Idle: return "Idle";
    case NodeStatus::Running: return "Running";
    case NodeStatus::Success: return "Success";
    case NodeStatus::Failure: return "Failure";
  }
  return "?";
}

std::string to_string(NodeType t) {
  switch (t) {
    case NodeType::Parallel: return "Parallel";
    case NodeType::Sequence: return "Sequence";
    case NodeType::Action: return "Action";
  }
  return "?";
}

std::string to_string(ActionType a) {
  switch (a) {
    case ActionType::VisitPoints: return "visit_points";
    case ActionType::FollowTargets: return "follow_targets";
    case ActionType::Herd: return "herd";
  }
  return "?";
}

namespace {

NodeStatus status_from_string(const std::string& s) {
  if (s == "Idle") return NodeStatus::Idle;
  if (s == "Running") return NodeStatus::Running;
  if (s == "Success") return NodeStatus::Success;
  if (s == "Failure") return NodeStatus::Failure;
  throw ContractError("unknown status '" + s + "'");
}

NodeType type_from_string(const std::string& s) {
  if (s == "Parallel") return NodeType::Parallel;
  if (s == "Sequence") return NodeType::Sequence;
  if (s == "Action") return NodeType::Action;
  throw ContractError("unknown node_type '" + s + "'");
}

ActionType action_from_string(const std::string& s) {
  if (s == "visit_points") return ActionType::VisitPoints;
  if (s == "follow_targets") return ActionType::FollowTargets;
  if (s == "herd") return ActionType::Herd;
  throw ContractError("unknown action_type '" + s + "'");
}

bool terminal(NodeStatus s) { return s == NodeStatus::Success || s == NodeStatus::Failure; }

}  // namespace

Tree::Tree(Node root) : root_(std::move(root)) { reindex(); }

void Tree::reindex() {
  index_.clear();
  std::vector<int> path;
  std::function<void(const Node&)> walk = [&](const Node& n) {
    index_.emplace_back(n.idx, path);
    for (size_t i = 0; i < n.children.size(); ++i) {
      path.push_back(static_cast<int>(i));
      walk(n.children[i]);
      path.pop_back();
    }
  };
  walk(root_);
}

const Node* Tree::find(int idx) const {
  for (const auto& [id, path] : index_) {
    if (id != idx) continue;
    const Node* n = &root_;
    for (int step : path) n = &n->children[static_cast<size_t>(step)];
    return n;
  }
  return nullptr;
}

Node* Tree::find(int idx) { return const_cast<Node*>(std::as_const(*this).find(idx)); }

std::vector<const Node*> Tree::path_to(int idx) const {
  for (const auto& [id, path] : index_) {
    if (id != idx) continue;
    std::vector<const Node*> chain{&root_};
    const Node* n = &root_;
    for (int step : path) {
      n = &n->children[static_cast<size_t>(step)];
      chain.push_back(n);
    }
    return chain;
  }
  return {};
}

std::vector<std::string> validate_tree(const Tree& t) {
  std::vector<std::string> diags;
  std::set<int> seen;
  std::function<void(const Node&)> walk = [&](const Node& n) {
    if (!seen.insert(n.idx).second)
      diags.push_back("duplicate idx " + std::to_string(n.idx));
    if (n.is_action()) {
      if (!n.children.empty())
        diags.push_back("Action node " + std::to_string(n.idx) +
                        " has children (children must be empty for Action nodes)");
    } else {
      if (n.children.empty())
        diags.push_back(to_string(n.node_type) + " node " + std::to_string(n.idx) +
                        " has no children");
      if (!n.robot_ids.empty() || !n.object_ids.empty() || !n.region_ids.empty() ||
          !n.points.empty())
        diags.push_back("composite node " + std::to_string(n.idx) +
                        " carries action-only bindings");
      bool any_running = false, any_non_idle = false;
      for (const auto& c : n.children) {
        any_running |= c.status == NodeStatus::Running;
        any_non_idle |= c.status != NodeStatus::Idle;
      }
      if (n.status == NodeStatus::Success && any_running)
        diags.push_back("Success composite " + std::to_string(n.idx) + " has a Running child");
      if (n.status == NodeStatus::Running && !any_non_idle)
        diags.push_back("Running composite " + std::to_string(n.idx) + " has only Idle children");
    }
    for (const auto& c : n.children) walk(c);
  };
  walk(t.root());
  return diags;
}

namespace {

void collect_ready(const Node& n, std::vector<int>& out) {
  if (terminal(n.status)) return;
  if (n.is_action()) {
    if (n.status == NodeStatus::Idle) out.push_back(n.idx);
    return;
  }
  if (n.node_type == NodeType::Sequence) {
    for (const auto& c : n.children) {
      if (c.status == NodeStatus::Success) continue;
      if (c.status == NodeStatus::Failure) return;  // blocks later siblings
      collect_ready(c, out);
      return;  // only the first non-terminal child is explored
    }
    return;
  }
  for (const auto& c : n.children)
    if (!terminal(c.status)) collect_ready(c, out);
}

}  // namespace

std::vector<int> ready_actions(const Tree& t) {
  std::vector<int> out;
  collect_ready(t.root(), out);
  std::sort(out.begin(), out.end());
  return out;
}

void mark_running(Tree& t, const std::vector<int>& selected) {
  if (selected.empty()) return;
  const std::vector<int> ready = ready_actions(t);
  for (int idx : selected) {
    const Node* n = t.find(idx);
    if (!n) throw ContractError("mark_running: unknown idx " + std::to_string(idx));
    const bool is_ready = std::find(ready.begin(), ready.end(), idx) != ready.end();
    if (!is_ready && n->status != NodeStatus::Running)
      throw ContractError("mark_running: node " + std::to_string(idx) + " is not ready");
  }
  for (int idx : selected) {
    // Re-walk the path on the mutable tree.
    std::vector<const Node*> chain = t.path_to(idx);
    for (const Node* c : chain) {
      Node* m = t.find(c->idx);
      m->status = NodeStatus::Running;
    }
  }
}

std::vector<int> apply_action_finish(Tree& t, int idx) {
  Node* n = t.find(idx);
  if (!n) throw ContractError("apply_action_finish: unknown idx " + std::to_string(idx));
  if (!n->is_action())
    throw ContractError("apply_action_finish: node " + std::to_string(idx) + " is not an Action");
  if (n->status != NodeStatus::Running)
    throw ContractError("apply_action_finish: node " + std::to_string(idx) + " is not Running");
  n->status = NodeStatus::Success;

  std::vector<int> flipped;
  std::vector<const Node*> chain = t.path_to(idx);
  // Bottom-up over the ancestors (skip the action itself).
  for (auto it = chain.rbegin() + 1; it != chain.rend(); ++it) {
    Node* comp = t.find((*it)->idx);
    const bool all_success =
        std::all_of(comp->children.begin(), comp->children.end(),
                    [](const Node& c) { return c.status == NodeStatus::Success; });
    if (!all_success) break;
    if (comp->status == NodeStatus::Success) continue;
    comp->status = NodeStatus::Success;
    flipped.push_back(comp->idx);
  }
  return flipped;
}

namespace {

void fail_unfinished(Node& n) {
  if (n.status == NodeStatus::Idle || n.status == NodeStatus::Running)
    n.status = NodeStatus::Failure;
  for (auto& c : n.children) fail_unfinished(c);
}

}  // namespace

void apply_composite_finish(Tree& t, int idx) {
  Node* n = t.find(idx);
  if (!n) throw ContractError("apply_composite_finish: unknown idx " + std::to_string(idx));
  if (n->is_action())
    throw ContractError("apply_composite_finish: node " + std::to_string(idx) +
                        " is an Action node");
  if (n->status != NodeStatus::Running)
    throw ContractError("apply_composite_finish: node " + std::to_string(idx) + " is not Running");
  for (auto& c : n->children) fail_unfinished(c);
  n->status = NodeStatus::Success;
}

std::string apply_trigger_fired(Tree& t, int idx) {
  Node* n = t.find(idx);
  if (!n) throw ContractError("apply_trigger_fired: unknown idx " + std::to_string(idx));
  if (!n->is_action())
    throw ContractError("apply_trigger_fired: node " + std::to_string(idx) + " is not an Action");
  if (n->status != NodeStatus::Running)
    throw ContractError("apply_trigger_fired: node " + std::to_string(idx) + " is not Running");
  if (n->trigger_condition.empty())
    throw ContractError("apply_trigger_fired: node " + std::to_string(idx) +
                        " has no trigger_condition");
  n->status = NodeStatus::Failure;
  return n->task_name;
}

nlohmann::json to_json(const Node& n) {
  nlohmann::json j;
  j["idx"] = n.idx;
  j["node_type"] = to_string(n.node_type);
  j["task_name"] = n.task_name;
  j["status"] = to_string(n.status);
  j["constraints"] = n.constraints;
  j["trigger_condition"] = n.trigger_condition;
  j["finish_condition"] = n.finish_condition;
  j["hints"] = n.hints;
  j["children"] = nlohmann::json::array();
  for (const auto& c : n.children) j["children"].push_back(to_json(c));
  if (n.is_action()) {
    j["action_type"] = to_string(n.action_type);
    j["robot_ids"] = n.robot_ids;
    j["object_ids"] = n.object_ids;
    j["region_ids"] = n.region_ids;
    j["points"] = nlohmann::json::array();
    for (const auto& p : n.points) j["points"].push_back({p.x(), p.y()});
  }
  return j;
}

nlohmann::json to_json(const Tree& t) { return to_json(t.root()); }

namespace {

Node node_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("behavior tree node must be an object");
  Node n;
  try {
    n.idx = j.at("idx").get<int>();
    n.node_type = type_from_string(j.at("node_type").get<std::string>());
    n.task_name = j.value("task_name", std::string{});
    n.status = status_from_string(j.value("status", std::string{"Idle"}));
    n.constraints = j.value("constraints", std::vector<std::string>{});
    n.trigger_condition = j.value("trigger_condition", std::string{});
    n.finish_condition = j.value("finish_condition", std::string{});
    n.hints = j.value("hints", std::vector<std::string>{});
    if (j.contains("children"))
      for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
    // Bindings are parsed for every node; validate_tree flags composites that
    // carry them.
    if (j.contains("action_type"))
      n.action_type = action_from_string(j.at("action_type").get<std::string>());
    n.robot_ids = j.value("robot_ids", std::vector<int>{});
    n.object_ids = j.value("object_ids", std::vector<int>{});
    n.region_ids = j.value("region_ids", std::vector<int>{});
    if (j.contains("points"))
      for (const auto& p : j.at("points")) {
        if (!p.is_array() || p.size() != 2)
          throw ContractError("points entries must be [x, y] pairs");
        n.points.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed behavior tree node: ") + e.what());
  }
  return n;
}

}  // namespace

Tree tree_from_json(const nlohmann::json& doc) { return Tree(node_from_json(doc)); }

}  // namespace mrplan::bt
