#pragma once

#include "mrplan/btree.hpp"
#include "mrplan/mission.hpp"
#include "mrplan/plan.hpp"
#include "mrplan/provider.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mrplan::orchestrate {

// Stage tags used for provider calls, transcripts, and playbooks.
inline constexpr const char* kStageStandardize = "standardize";
inline constexpr const char* kStageDependency = "dependency";
inline constexpr const char* kStageDependencyUpdate = "dependency_update";
inline constexpr const char* kStageTree = "tree";
inline constexpr const char* kStageSelect = "select";
inline constexpr const char* kStagePlan = "plan";
inline constexpr const char* kStageMissionFinish = "mission_finish";

// A stage failed validation on every allowed attempt (1 initial + 2 repairs).
struct StageError : std::runtime_error {
  explicit StageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Named templates with {{slot}} interpolation. Compiled-in copies of
// data/prompts by default; a directory can override them.
class PromptLibrary {
 public:
  static PromptLibrary builtin();
  static PromptLibrary from_dir(const std::string& dir);

  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& slots) const;

 private:
  std::map<std::string, std::string> templates_;
};

struct DependencyAnalysis {
  std::vector<TaskClause> tasks;
  std::vector<std::pair<std::string, std::string>> edges;  // (before, after)

  const TaskClause* find_task(const std::string& label) const;
};

nlohmann::json dep_to_json(const DependencyAnalysis& dep);
DependencyAnalysis dep_from_json(const nlohmann::json& j);

// Unique labels, nonempty finishes, resolvable edge endpoints, acyclic.
std::vector<std::string> validate_dependencies(const DependencyAnalysis& dep);

struct Pipeline {
  Provider& provider;
  Transcript& transcript;
  const PromptLibrary& prompts;
  int max_repairs = 2;  // provider calls per stage <= 1 + max_repairs
};

// Renders either the standardized sections or the raw text + world, depending
// on what is available (the template-ablation path).
std::string render_mission_context(const MissionSpec& spec);

StandardizedMission standardize(Pipeline& p, const std::string& raw_text,
                                const WorldState& world);

DependencyAnalysis extract_tasks(Pipeline& p, const MissionSpec& spec);

DependencyAnalysis update_dependencies(Pipeline& p, const MissionSpec& spec,
                                       const DependencyAnalysis& current,
                                       const std::string& fired_task_label);

bt::Tree build_tree(Pipeline& p, const MissionSpec& spec, const DependencyAnalysis& dep);

// The provider's proposal is validated against the deterministic ready set;
// after one failed repair the deterministic set is used and the discrepancy
// logged. Skips the provider entirely when nothing is ready.
std::vector<int> select_ready(Pipeline& p, const bt::Tree& tree);

plan::PlanDoc gen_plan(Pipeline& p, const MissionSpec& spec, const bt::Node& node);

dsl::ExprPtr gen_mission_finish(Pipeline& p, const MissionSpec& spec);

struct PriceConfig {
  double per_input_token = 0.0;
  double per_output_token = 0.0;
};

struct UsageSummary {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double cost = 0.0;
  int errors = 0;  // repair-triggering validation failures
  std::optional<double> tokens_per_error;  // output tokens / errors; absent when errors == 0
};

UsageSummary account(const Transcript& transcript, const PriceConfig& prices = {});

nlohmann::json to_json(const UsageSummary& u);

}  // namespace mrplan::orchestrate
