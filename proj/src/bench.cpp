#include "mrplan/bench.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace mrplan::bench {

namespace fs = std::filesystem;

std::string playbook_path(const std::string& dataset_dir, const std::string& mission_id,
                          bool with_template) {
  std::string stem = mission_id;
  std::transform(stem.begin(), stem.end(), stem.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return (fs::path(dataset_dir) / "playbooks" /
          (stem + (with_template ? ".correct.json" : ".raw.json")))
      .string();
}

namespace {

std::optional<double> ratio(double num, int denom) {
  if (denom == 0) return std::nullopt;
  return num / denom;
}

CategoryMetrics aggregate(const std::string& name, const std::vector<MissionMetrics>& rows) {
  CategoryMetrics out;
  out.category = name;
  if (rows.empty()) return out;
  double out_tokens_total = 0.0;
  int errors_total = 0;
  for (const auto& m : rows) {
    out.success_rate += m.success_rate;
    out.avg_input_tokens += m.avg_input_tokens;
    out.avg_output_tokens += m.avg_output_tokens;
    out.avg_cost += m.avg_cost;
    out_tokens_total += m.avg_output_tokens * m.repeats;
    errors_total += m.errors;
  }
  const double n = static_cast<double>(rows.size());
  out.success_rate /= n;
  out.avg_input_tokens /= n;
  out.avg_output_tokens /= n;
  out.avg_cost /= n;
  out.tokens_per_error = ratio(out_tokens_total, errors_total);
  return out;
}

BenchmarkResult run_mode(const std::string& dataset_dir, const BenchOptions& opts,
                         bool with_template) {
  BenchmarkResult result;
  result.template_mode = with_template ? "with" : "without";

  std::vector<std::string> mission_files;
  for (const auto& entry : fs::directory_iterator(fs::path(dataset_dir) / "missions"))
    if (entry.path().extension() == ".json") mission_files.push_back(entry.path().string());
  std::sort(mission_files.begin(), mission_files.end());

  for (const auto& file : mission_files) {
    MissionMetrics metrics;
    metrics.repeats = opts.repeats;
    double in_total = 0.0, out_total = 0.0, cost_total = 0.0;
    try {
      const MissionSpec spec = load_mission_file(file);
      metrics.mission_id = spec.mission_id;
      metrics.category = spec.category;
      for (int rep = 0; rep < opts.repeats; ++rep) {
        std::unique_ptr<Provider> provider;
        if (opts.provider == "mock") {
          provider = std::make_unique<ScriptedProvider>(ScriptedProvider::from_file(
              playbook_path(dataset_dir, spec.mission_id, with_template)));
        } else {
          provider = std::make_unique<HttpProvider>(LiveProviderConfig::from_env());
        }
        engine::EngineOptions eopts;
        eopts.use_template = with_template;
        eopts.prices = opts.prices;
        const engine::MissionReport report =
            engine::run_mission(spec, *provider, spec.sim_config, eopts);
        if (report.success) metrics.successes += 1;
        in_total += static_cast<double>(report.usage.input_tokens);
        out_total += static_cast<double>(report.usage.output_tokens);
        cost_total += report.usage.cost;
        metrics.errors += report.usage.errors;
      }
    } catch (const std::exception& e) {
      // A broken mission file counts as failed runs; keep the suite going.
      if (metrics.mission_id.empty()) metrics.mission_id = fs::path(file).stem().string();
      if (metrics.category.empty()) metrics.category = "?";
    }
    metrics.success_rate =
        opts.repeats ? static_cast<double>(metrics.successes) / opts.repeats : 0.0;
    metrics.avg_input_tokens = opts.repeats ? in_total / opts.repeats : 0.0;
    metrics.avg_output_tokens = opts.repeats ? out_total / opts.repeats : 0.0;
    metrics.avg_cost = opts.repeats ? cost_total / opts.repeats : 0.0;
    metrics.tokens_per_error = ratio(out_total, metrics.errors);
    result.missions.push_back(std::move(metrics));
  }

  std::sort(result.missions.begin(), result.missions.end(),
            [](const auto& a, const auto& b) { return a.mission_id < b.mission_id; });

  for (const std::string cat : {"A", "B", "C"}) {
    std::vector<MissionMetrics> rows;
    for (const auto& m : result.missions)
      if (m.category == cat) rows.push_back(m);
    result.categories.push_back(aggregate(cat, rows));
  }
  result.categories.push_back(aggregate("Overall", result.missions));
  return result;
}

}  // namespace

std::vector<BenchmarkResult> run_bench(const std::string& dataset_dir, const BenchOptions& opts) {
  std::vector<BenchmarkResult> results;
  if (opts.both_modes) {
    results.push_back(run_mode(dataset_dir, opts, true));
    results.push_back(run_mode(dataset_dir, opts, false));
  } else {
    results.push_back(run_mode(dataset_dir, opts, opts.with_template));
  }
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) j.push_back(to_json(r));
    std::ofstream out(fs::path(opts.out_dir) / "bench_report.json");
    out << j.dump(2) << "\n";
  }
  return results;
}

nlohmann::json to_json(const BenchmarkResult& r) {
  nlohmann::json j;
  j["template_mode"] = r.template_mode;
  j["missions"] = nlohmann::json::array();
  for (const auto& m : r.missions) {
    nlohmann::json row;
    row["mission_id"] = m.mission_id;
    row["category"] = m.category;
    row["repeats"] = m.repeats;
    row["successes"] = m.successes;
    row["success_rate"] = m.success_rate;
    row["avg_input_tokens"] = m.avg_input_tokens;
    row["avg_output_tokens"] = m.avg_output_tokens;
    row["avg_cost"] = m.avg_cost;
    row["errors"] = m.errors;
    row["tokens_per_error"] =
        m.tokens_per_error ? nlohmann::json(*m.tokens_per_error) : nlohmann::json(nullptr);
    j["missions"].push_back(std::move(row));
  }
  j["categories"] = nlohmann::json::array();
  for (const auto& c : r.categories) {
    nlohmann::json row;
    row["category"] = c.category;
    row["success_rate"] = c.success_rate;
    row["avg_input_tokens"] = c.avg_input_tokens;
    row["avg_output_tokens"] = c.avg_output_tokens;
    row["avg_cost"] = c.avg_cost;
    row["tokens_per_error"] =
        c.tokens_per_error ? nlohmann::json(*c.tokens_per_error) : nlohmann::json(nullptr);
    j["categories"].push_back(std::move(row));
  }
  return j;
}

std::string render_table(const BenchmarkResult& r) {
  std::ostringstream out;
  out << "Template mode: " << r.template_mode << "\n";
  out << std::left << std::setw(10) << "Category" << std::right << std::setw(14) << "SuccessRate"
      << std::setw(14) << "In(1e3)" << std::setw(14) << "Out(1e3)" << std::setw(12) << "Cost($)"
      << std::setw(16) << "Tok/Err(1e3)" << "\n";
  auto line = [&](const CategoryMetrics& c) {
    out << std::left << std::setw(10) << c.category << std::right << std::fixed
        << std::setprecision(2) << std::setw(14) << c.success_rate << std::setw(14)
        << c.avg_input_tokens / 1000.0 << std::setw(14) << c.avg_output_tokens / 1000.0
        << std::setw(12) << std::setprecision(4) << c.avg_cost;
    if (c.tokens_per_error)
      out << std::setw(16) << std::setprecision(2) << *c.tokens_per_error / 1000.0;
    else
      out << std::setw(16) << "-";
    out << "\n";
  };
  for (const auto& c : r.categories) line(c);
  return out.str();
}

}  // namespace mrplan::bench
