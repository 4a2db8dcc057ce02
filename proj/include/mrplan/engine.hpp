#pragma once

#include "mrplan/mission.hpp"
#include "mrplan/orchestrator.hpp"
#include "mrplan/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mrplan::engine {

struct Event {
  enum class Kind {
    TriggerFired,
    ActionFinished,
    CompositeFinished,
    MissionFinished,
    Timeout,
    Unreachable,
  };
  Kind kind = Kind::MissionFinished;
  int node_idx = -1;  // -1 for mission-level events
  long tick = 0;
  double time = 0.0;
  std::string detail;
};

std::string to_string(Event::Kind k);

enum class FinishReason { Completed, Timeout, IrreparableFailure };

std::string to_string(FinishReason r);

struct MissionReport {
  std::string mission_id;
  bool success = false;  // success <=> reason == Completed
  FinishReason reason = FinishReason::Timeout;
  long ticks = 0;
  double sim_time = 0.0;
  double wall_time_seconds = 0.0;
  std::vector<Event> events;
  orchestrate::UsageSummary usage;
  std::string trace_digest;
  bool template_mode = true;
  std::string failure_detail;
};

nlohmann::json to_json(const MissionReport& r);

struct EngineOptions {
  bool use_template = true;  // false reproduces the no-template ablation
  std::string out_dir;       // when set: report.json, trace.jsonl, transcript.jsonl
  bool plot = false;         // also emit plot.svg (+ coverage.svg when grids exist)
  orchestrate::PriceConfig prices;
  double path_resolution = 0.1;
  double path_inflation = 0.1;
  int max_tree_rebuilds = 5;
  const orchestrate::PromptLibrary* prompts = nullptr;  // default: builtin templates
};

// The full pipeline: (optional) standardization, task extraction, tree
// construction, per-node plan generation, then the tick loop with trigger /
// finish / mission-finish evaluation and replanning, until the mission finish
// condition holds or the tick budget runs out. Failures never escape; they
// fold into the report.
MissionReport run_mission(const MissionSpec& spec, Provider& provider,
                          const sim::SimConfig& sim_config, const EngineOptions& options = {});

struct ReplayVerdict {
  bool match = false;
  long first_divergent_tick = -1;  // -1 when match or structural failure
  std::string message;
};

// Re-executes the recorded waypoint streams through the simulator and checks
// positions, clock, coverage, and the final digest against the trace.
ReplayVerdict replay(const std::string& trace_path);

// Static figures rendered straight from trace ticks.
void write_trajectory_svg(const std::string& path, const WorldState& initial,
                          const std::vector<sim::TraceTick>& ticks);
void write_coverage_svg(const std::string& path, const std::vector<sim::TraceTick>& ticks);

}  // namespace mrplan::engine
