#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mrplan/btree.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <random>
#include <set>

using namespace mrplan;
using namespace mrplan::bt;

namespace {

Node action(int idx, const std::string& name, NodeStatus status = NodeStatus::Idle,
            const std::string& trigger = "") {
  Node n;
  n.idx = idx;
  n.node_type = NodeType::Action;
  n.task_name = name;
  n.status = status;
  n.trigger_condition = trigger;
  n.finish_condition = "1 == 0";
  n.robot_ids = {1};
  return n;
}

Node composite(int idx, NodeType type, std::vector<Node> children,
               NodeStatus status = NodeStatus::Idle) {
  Node n;
  n.idx = idx;
  n.node_type = type;
  n.task_name = "group" + std::to_string(idx);
  n.status = status;
  n.children = std::move(children);
  return n;
}

}  // namespace

TEST_CASE("validate_tree basics") {
  CHECK(validate_tree(Tree(action(0, "solo"))).empty());

  // Duplicate idx.
  Tree dup(composite(0, NodeType::Sequence, {action(3, "a"), action(3, "b")}, NodeStatus::Idle));
  bool found = false;
  for (const auto& d : validate_tree(dup))
    if (d.find("duplicate idx") != std::string::npos) found = true;
  CHECK(found);

  // Action with children violates the leaf rule.
  Node bad = action(0, "a");
  bad.children.push_back(action(1, "b"));
  found = false;
  for (const auto& d : validate_tree(Tree(bad)))
    if (d.find("children must be empty for Action nodes") != std::string::npos) found = true;
  CHECK(found);

  // Composite without children.
  Node empty_comp;
  empty_comp.idx = 0;
  empty_comp.node_type = NodeType::Parallel;
  CHECK_FALSE(validate_tree(Tree(empty_comp)).empty());

  // Composite carrying action-only bindings.
  Node bound = composite(0, NodeType::Parallel, {action(1, "a")});
  bound.robot_ids = {1};
  found = false;
  for (const auto& d : validate_tree(Tree(bound)))
    if (d.find("action-only bindings") != std::string::npos) found = true;
  CHECK(found);

  // Status coherence.
  Tree incoherent(composite(0, NodeType::Parallel, {action(1, "a", NodeStatus::Running)},
                            NodeStatus::Success));
  CHECK_FALSE(validate_tree(incoherent).empty());
}

TEST_CASE("ready_actions traversal rules") {
  // Sequence(A1 Idle, A2 Idle) -> [A1]
  Tree seq(composite(0, NodeType::Sequence, {action(1, "a"), action(2, "b")}));
  CHECK(ready_actions(seq) == std::vector<int>{1});

  // Parallel(A1 Idle, A2 Idle) -> [A1, A2]
  Tree par(composite(0, NodeType::Parallel, {action(1, "a"), action(2, "b")}));
  CHECK(ready_actions(par) == std::vector<int>{1, 2});

  // Sequence(A1 Success, A2 Idle) -> [A2]
  Tree done_first(composite(0, NodeType::Sequence,
                            {action(1, "a", NodeStatus::Success), action(2, "b")},
                            NodeStatus::Running));
  CHECK(ready_actions(done_first) == std::vector<int>{2});

  // Running actions are not re-selected.
  Tree running(composite(0, NodeType::Parallel,
                         {action(1, "a", NodeStatus::Running), action(2, "b")},
                         NodeStatus::Running));
  CHECK(ready_actions(running) == std::vector<int>{2});

  // A Failure child blocks later siblings of a Sequence but not a Parallel.
  Tree blocked(composite(0, NodeType::Sequence,
                         {action(1, "a", NodeStatus::Failure), action(2, "b")},
                         NodeStatus::Running));
  CHECK(ready_actions(blocked).empty());
  Tree unblocked(composite(0, NodeType::Parallel,
                           {action(1, "a", NodeStatus::Failure), action(2, "b")},
                           NodeStatus::Running));
  CHECK(ready_actions(unblocked) == std::vector<int>{2});

  // Nested: Parallel(Sequence(A,B), C).
  Tree nested(composite(
      0, NodeType::Parallel,
      {composite(1, NodeType::Sequence, {action(2, "a"), action(3, "b")}), action(4, "c")}));
  CHECK(ready_actions(nested) == std::vector<int>{2, 4});
}

TEST_CASE("mark_running") {
  Tree t(composite(0, NodeType::Sequence, {action(1, "a"), action(2, "b")}));
  mark_running(t, {1});
  CHECK(t.find(1)->status == NodeStatus::Running);
  CHECK(t.root().status == NodeStatus::Running);
  CHECK(t.find(2)->status == NodeStatus::Idle);

  // Empty selection: no change.
  Tree t2(composite(0, NodeType::Sequence, {action(1, "a"), action(2, "b")}));
  mark_running(t2, {});
  CHECK(t2.root().status == NodeStatus::Idle);

  // Idempotent on an already-Running node.
  mark_running(t, {1});
  CHECK(t.find(1)->status == NodeStatus::Running);

  // Selecting a non-ready node is a contract violation.
  CHECK_THROWS_AS(mark_running(t, {2}), ContractError);
  CHECK_THROWS_AS(mark_running(t, {99}), ContractError);
}

TEST_CASE("apply_action_finish propagation") {
  // Parallel(A1 Running, A2 Running): finishing A1 leaves the composite
  // Running and flips nothing.
  Tree t(composite(0, NodeType::Parallel,
                   {action(1, "a", NodeStatus::Running), action(2, "b", NodeStatus::Running)},
                   NodeStatus::Running));
  auto flipped = apply_action_finish(t, 1);
  CHECK(flipped.empty());
  CHECK(t.find(1)->status == NodeStatus::Success);
  CHECK(t.root().status == NodeStatus::Running);

  // Finishing the last child flips the composite.
  flipped = apply_action_finish(t, 2);
  CHECK(flipped == std::vector<int>{0});
  CHECK(t.root().status == NodeStatus::Success);

  // Single-action tree.
  Tree solo(action(0, "only", NodeStatus::Running));
  CHECK(apply_action_finish(solo, 0).empty());
  CHECK(solo.root().status == NodeStatus::Success);

  // Errors.
  Tree idle(action(0, "x"));
  CHECK_THROWS_AS(apply_action_finish(idle, 0), ContractError);
  CHECK_THROWS_AS(apply_action_finish(idle, 42), ContractError);
}

TEST_CASE("apply_composite_finish fails unfinished descendants") {
  Tree t(composite(0, NodeType::Parallel,
                   {action(1, "a", NodeStatus::Success), action(2, "b", NodeStatus::Running),
                    action(3, "c", NodeStatus::Idle)},
                   NodeStatus::Running));
  apply_composite_finish(t, 0);
  CHECK(t.root().status == NodeStatus::Success);
  CHECK(t.find(1)->status == NodeStatus::Success);
  CHECK(t.find(2)->status == NodeStatus::Failure);
  CHECK(t.find(3)->status == NodeStatus::Failure);

  // All children already Success: untouched.
  Tree done(composite(0, NodeType::Parallel,
                      {action(1, "a", NodeStatus::Success), action(2, "b", NodeStatus::Success)},
                      NodeStatus::Running));
  apply_composite_finish(done, 0);
  CHECK(done.find(1)->status == NodeStatus::Success);
  CHECK(done.find(2)->status == NodeStatus::Success);

  // Nested Running composite fails recursively.
  Tree nested(composite(
      0, NodeType::Sequence,
      {composite(1, NodeType::Parallel,
                 {action(2, "a", NodeStatus::Running), action(3, "b", NodeStatus::Idle)},
                 NodeStatus::Running)},
      NodeStatus::Running));
  apply_composite_finish(nested, 0);
  CHECK(nested.find(1)->status == NodeStatus::Failure);
  CHECK(nested.find(2)->status == NodeStatus::Failure);
  CHECK(nested.find(3)->status == NodeStatus::Failure);
  CHECK(nested.root().status == NodeStatus::Success);

  // Action node is rejected.
  Tree solo(action(0, "x", NodeStatus::Running));
  CHECK_THROWS_AS(apply_composite_finish(solo, 0), ContractError);
}

TEST_CASE("apply_trigger_fired") {
  Tree t(composite(0, NodeType::Parallel,
                   {action(1, "risky", NodeStatus::Running, "dist(robot(1), region(0)) < 1"),
                    action(2, "other", NodeStatus::Running)},
                   NodeStatus::Running));
  const std::string fired = apply_trigger_fired(t, 1);
  CHECK(fired == "risky");
  CHECK(t.find(1)->status == NodeStatus::Failure);
  CHECK(t.find(2)->status == NodeStatus::Running);  // sibling untouched

  // Idle node: precondition error.
  Tree idle(action(0, "x", NodeStatus::Idle, "1 < 2"));
  CHECK_THROWS_AS(apply_trigger_fired(idle, 0), ContractError);

  // Empty trigger: precondition error.
  Tree no_trigger(action(0, "x", NodeStatus::Running));
  CHECK_THROWS_AS(apply_trigger_fired(no_trigger, 0), ContractError);
}

TEST_CASE("wire format round trip uses exact field names") {
  Node a = action(2, "visit", NodeStatus::Idle);
  a.action_type = ActionType::VisitPoints;
  a.robot_ids = {1, 2};
  a.object_ids = {0};
  a.region_ids = {3};
  a.points = {Vec2{1, 2}, Vec2{3, 4}};
  a.constraints = {"max speed 1.0"};
  a.hints = {"go fast"};
  Tree t(composite(0, NodeType::Sequence, {a}));

  const nlohmann::json j = to_json(t);
  for (const char* key : {"idx", "node_type", "task_name", "status", "constraints",
                          "trigger_condition", "finish_condition", "hints", "children"})
    CHECK(j.contains(key));
  const auto& child = j.at("children").at(0);
  for (const char* key : {"action_type", "robot_ids", "object_ids", "region_ids", "points"})
    CHECK(child.contains(key));
  CHECK(child.at("action_type") == "visit_points");

  const Tree back = tree_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.find(2)->points.size() == 2);
  CHECK(back.find(2)->points[1].y() == 4.0);

  CHECK_THROWS_AS(tree_from_json(nlohmann::json::parse(R"({"idx": 0})")), ContractError);
  CHECK_THROWS_AS(tree_from_json(nlohmann::json::parse(R"({"idx": 0, "node_type": "Selector"})")),
                  ContractError);
}

// ---------------------------------------------------------------------------
// Property harness: random trees driven through random legal operations.
// ---------------------------------------------------------------------------

namespace {

struct TreeGen {
  std::mt19937 rng;
  int next_idx = 0;

  explicit TreeGen(std::uint32_t seed) : rng(seed) {}

  Node gen(int depth, int& budget) {
    const bool leaf = depth >= 4 || budget <= 1 || (rng() % 3 == 0);
    if (leaf) {
      --budget;
      Node a = action(next_idx++, "t" + std::to_string(next_idx));
      if (rng() % 4 == 0) a.trigger_condition = "dist(robot(1), region(0)) < 1";
      return a;
    }
    Node c;
    c.idx = next_idx++;
    c.node_type = rng() % 2 ? NodeType::Sequence : NodeType::Parallel;
    c.task_name = "g" + std::to_string(c.idx);
    --budget;
    const int n_children = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n_children && budget > 0; ++i) c.children.push_back(gen(depth + 1, budget));
    if (c.children.empty()) {
      --budget;
      c.children.push_back(action(next_idx++, "pad"));
    }
    return c;
  }
};

void collect_status(const Node& n, std::map<int, NodeStatus>& out) {
  out[n.idx] = n.status;
  for (const auto& c : n.children) collect_status(c, out);
}

void collect_actions(const Node& n, std::vector<const Node*>& out) {
  if (n.is_action()) out.push_back(&n);
  for (const auto& c : n.children) collect_actions(c, out);
}

bool lattice_ok(NodeStatus before, NodeStatus after) {
  if (before == after) return true;
  switch (before) {
    case NodeStatus::Idle:
      return after == NodeStatus::Running || after == NodeStatus::Failure;
    case NodeStatus::Running:
      return after == NodeStatus::Success || after == NodeStatus::Failure;
    default:
      return false;  // Success/Failure are terminal
  }
}

// Ready actions are Idle leaves never shadowed by a terminal composite.
void check_ready_set(const Tree& t) {
  const auto ready = ready_actions(t);
  std::set<int> ready_set(ready.begin(), ready.end());
  std::function<void(const Node&, bool)> walk = [&](const Node& n, bool shadowed) {
    const bool terminal = n.status == NodeStatus::Success || n.status == NodeStatus::Failure;
    if (n.is_action()) {
      if (ready_set.count(n.idx)) {
        REQUIRE(n.status == NodeStatus::Idle);
        REQUIRE_FALSE(shadowed);
      }
      return;
    }
    for (const auto& c : n.children) walk(c, shadowed || terminal);
  };
  walk(t.root(), false);

  // Determinism: a copy yields the same list and the same serialization.
  const Tree copy = t;
  REQUIRE(ready_actions(copy) == ready);
  REQUIRE(to_json(copy).dump() == to_json(t).dump());
}

}  // namespace

TEST_CASE("status lattice, ready-set soundness, and finish rules over 10000 random trees") {
  std::mt19937 op_rng(99);
  int composite_rule_checks = 0;
  for (int iter = 0; iter < 10000; ++iter) {
    TreeGen gen(static_cast<std::uint32_t>(iter * 2654435761u + 17));
    int budget = 1 + static_cast<int>(gen.rng() % 15);
    Tree t(gen.gen(0, budget));
    if (!validate_tree(t).empty()) continue;  // generator keeps these rare

    // Tracks which composites became Success via the early-finish rule.
    std::set<int> early_finished;

    for (int step = 0; step < 6; ++step) {
      std::map<int, NodeStatus> before;
      collect_status(t.root(), before);
      check_ready_set(t);

      const int op = static_cast<int>(op_rng() % 4);
      if (op == 0) {
        const auto ready = ready_actions(t);
        if (!ready.empty()) {
          std::vector<int> pick;
          for (int idx : ready)
            if (op_rng() % 2) pick.push_back(idx);
          if (pick.empty()) pick.push_back(ready.front());
          mark_running(t, pick);
        }
      } else if (op == 1) {
        std::vector<const Node*> actions;
        collect_actions(t.root(), actions);
        std::vector<int> running;
        for (const auto* a : actions)
          if (a->status == NodeStatus::Running) running.push_back(a->idx);
        if (!running.empty()) apply_action_finish(t, running[op_rng() % running.size()]);
      } else if (op == 2) {
        std::vector<const Node*> actions;
        collect_actions(t.root(), actions);
        std::vector<int> triggerable;
        for (const auto* a : actions)
          if (a->status == NodeStatus::Running && !a->trigger_condition.empty())
            triggerable.push_back(a->idx);
        if (!triggerable.empty())
          apply_trigger_fired(t, triggerable[op_rng() % triggerable.size()]);
      } else {
        std::vector<int> running_composites;
        std::function<void(const Node&)> walk = [&](const Node& n) {
          if (!n.is_action() && n.status == NodeStatus::Running)
            running_composites.push_back(n.idx);
          for (const auto& c : n.children) walk(c);
        };
        walk(t.root());
        if (!running_composites.empty()) {
          const int idx = running_composites[op_rng() % running_composites.size()];
          std::map<int, NodeStatus> pre;
          collect_status(t.root(), pre);
          apply_composite_finish(t, idx);
          early_finished.insert(idx);
          ++composite_rule_checks;
          // Post: the composite is Success and every descendant that was
          // Idle/Running is now Failure.
          const Node* comp = t.find(idx);
          REQUIRE(comp->status == NodeStatus::Success);
          std::function<void(const Node&)> verify = [&](const Node& n) {
            const NodeStatus was = pre.at(n.idx);
            if (was == NodeStatus::Idle || was == NodeStatus::Running)
              REQUIRE(n.status == NodeStatus::Failure);
            else
              REQUIRE(n.status == was);
            for (const auto& c : n.children) verify(c);
          };
          for (const auto& c : comp->children) verify(c);
        }
      }

      std::map<int, NodeStatus> after;
      collect_status(t.root(), after);
      for (const auto& [idx, status] : after) {
        CAPTURE(idx);
        REQUIRE(lattice_ok(before.at(idx), status));
      }

      // Success-propagation soundness: a Success composite either has all
      // children Success or became Success via the early-finish rule.
      std::function<void(const Node&)> verify_success = [&](const Node& n) {
        if (!n.is_action() && n.status == NodeStatus::Success && !early_finished.count(n.idx)) {
          for (const auto& c : n.children) {
            CAPTURE(n.idx);
            REQUIRE(c.status == NodeStatus::Success);
          }
        }
        for (const auto& c : n.children) verify_success(c);
      };
      verify_success(t.root());
    }
  }
  CHECK(composite_rule_checks > 1000);
}
