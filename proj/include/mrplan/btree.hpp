#pragma once

#include "mrplan/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace mrplan::bt {

enum class NodeStatus { Idle, Running, Success, Failure };
enum class NodeType { Parallel, Sequence, Action };
enum class ActionType { VisitPoints, FollowTargets, Herd };

std::string to_string(NodeStatus s);
std::string to_string(NodeType t);
std::string to_string(ActionType a);  // wire names: visit_points | follow_targets | herd

struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Node {
  int idx = 0;
  NodeType node_type = NodeType::Action;
  std::string task_name;
  NodeStatus status = NodeStatus::Idle;
  std::vector<std::string> constraints;
  std::string trigger_condition;
  std::string finish_condition;
  std::vector<std::string> hints;
  std::vector<Node> children;  // empty for Action nodes
  // Action-only bindings.
  ActionType action_type = ActionType::VisitPoints;
  std::vector<int> robot_ids;
  std::vector<int> object_ids;
  std::vector<int> region_ids;
  std::vector<Vec2> points;

  bool is_action() const { return node_type == NodeType::Action; }
};

class Tree {
 public:
  Tree() = default;
  explicit Tree(Node root);

  const Node& root() const { return root_; }
  Node& root() { return root_; }

  const Node* find(int idx) const;
  Node* find(int idx);
  // Root-to-node chain; empty when idx is unknown.
  std::vector<const Node*> path_to(int idx) const;

  void reindex();

 private:
  Node root_;
  std::vector<std::pair<int, std::vector<int>>> index_;  // idx -> child-offset path
};

// Structural and status-coherence diagnostics; empty means valid. Checks:
// unique idx, Action leaves, composite arity, action-only bindings confined to
// Action nodes, nonempty finish conditions, Success composites without Running
// children, Running composites with at least one non-Idle child.
std::vector<std::string> validate_tree(const Tree& t);

// Deterministic left-to-right readiness: under a Sequence only the first
// non-terminal child is explored, under a Parallel every non-terminal child
// is; an Action reached with status Idle is ready. Sorted by idx.
std::vector<int> ready_actions(const Tree& t);

// Marks each selected action and all its ancestors Running. Selections must
// come from ready_actions (already-Running re-selection is a no-op).
void mark_running(Tree& t, const std::vector<int>& selected);

// Action -> Success, then flips every composite whose children are now all
// Success; returns the flipped composite idxs bottom-up.
std::vector<int> apply_action_finish(Tree& t, int idx);

// Early composite completion: descendants still Idle/Running become Failure
// and the composite becomes Success.
void apply_composite_finish(Tree& t, int idx);

// Fired trigger terminates the action (-> Failure); returns its task_name so
// the dependency analysis can be updated.
std::string apply_trigger_fired(Tree& t, int idx);

nlohmann::json to_json(const Node& n);
nlohmann::json to_json(const Tree& t);
Tree tree_from_json(const nlohmann::json& doc);  // throws ContractError on malformed docs

}  // namespace mrplan::bt
