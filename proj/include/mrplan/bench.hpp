#pragma once

#include "mrplan/engine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mrplan::bench {

struct MissionMetrics {
  std::string mission_id;
  std::string category;
  int repeats = 0;
  int successes = 0;
  double success_rate = 0.0;
  double avg_input_tokens = 0.0;
  double avg_output_tokens = 0.0;
  double avg_cost = 0.0;
  int errors = 0;  // validation failures over all repeats
  std::optional<double> tokens_per_error;
};

struct CategoryMetrics {
  std::string category;  // "A" | "B" | "C" | "Overall"
  double success_rate = 0.0;
  double avg_input_tokens = 0.0;
  double avg_output_tokens = 0.0;
  double avg_cost = 0.0;
  std::optional<double> tokens_per_error;  // total output tokens / total errors
};

struct BenchmarkResult {
  std::string template_mode;  // "with" | "without"
  std::vector<MissionMetrics> missions;    // sorted by mission_id
  std::vector<CategoryMetrics> categories; // A, B, C, Overall
};

nlohmann::json to_json(const BenchmarkResult& r);
std::string render_table(const BenchmarkResult& r);

struct BenchOptions {
  int repeats = 5;
  bool with_template = true;
  bool both_modes = false;
  std::string provider = "mock";  // "mock" | "live"
  orchestrate::PriceConfig prices;
  std::string out_dir;  // when set: bench_report.json (and per-mode files)
};

// Dataset layout: <dir>/missions/*.json plus <dir>/playbooks/<id>.correct.json
// (template mode) and <id>.raw.json (raw mode). Per-mission failures are
// recorded, never abort the suite.
std::vector<BenchmarkResult> run_bench(const std::string& dataset_dir, const BenchOptions& opts);

// Playbook path conventions shared with the CLI and tests.
std::string playbook_path(const std::string& dataset_dir, const std::string& mission_id,
                          bool with_template);

}  // namespace mrplan::bench
