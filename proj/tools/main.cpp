// mrplan: natural-language multi-robot missions -> validated behavior trees
// and sandboxed plans, executed in a deterministic 2D simulator.

#include "mrplan/bench.hpp"
#include "mrplan/engine.hpp"
#include "mrplan/mission.hpp"
#include "mrplan/provider.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <memory>

namespace {

std::unique_ptr<mrplan::Provider> make_provider(const std::string& kind,
                                                const std::string& playbook) {
  if (kind == "mock") {
    if (playbook.empty())
      throw mrplan::ProviderError("mock provider needs --playbook PATH");
    return std::make_unique<mrplan::ScriptedProvider>(
        mrplan::ScriptedProvider::from_file(playbook));
  }
  if (kind == "live")
    return std::make_unique<mrplan::HttpProvider>(mrplan::LiveProviderConfig::from_env());
  throw mrplan::ProviderError("unknown provider '" + kind + "' (use live|mock)");
}

mrplan::orchestrate::PriceConfig prices_from_env() {
  const auto cfg = mrplan::LiveProviderConfig::from_env();
  return {cfg.price_per_input_token, cfg.price_per_output_token};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrplan: language-driven multi-robot mission engine"};
  app.require_subcommand(1);

  // run
  std::string mission_path, provider_kind = "mock", playbook_path, out_dir = "out", prompts_dir;
  bool no_template = false, plot = false;
  std::int64_t seed_override = -1;
  auto* cmd_run = app.add_subcommand("run", "run one mission end to end");
  cmd_run->add_option("mission", mission_path, "mission file")->required();
  cmd_run->add_option("--provider", provider_kind, "live|mock (default mock)");
  cmd_run->add_option("--playbook", playbook_path, "scripted playbook for the mock provider");
  cmd_run->add_flag("--no-template", no_template, "skip the standardization stage");
  cmd_run->add_option("--seed", seed_override, "override the mission seed");
  cmd_run->add_flag("--plot", plot, "emit trajectory/coverage SVG figures");
  cmd_run->add_option("--out", out_dir, "output directory (default ./out)");
  cmd_run->add_option("--prompts", prompts_dir, "override the prompt template directory");

  // bench
  std::string dataset_dir, bench_out = "out";
  int repeats = 5;
  bool both_modes = false, bench_no_template = false;
  std::string bench_provider = "mock";
  auto* cmd_bench = app.add_subcommand("bench", "run the mission dataset and report metrics");
  cmd_bench->add_option("dataset", dataset_dir, "dataset directory (missions/ + playbooks/)")
      ->required();
  cmd_bench->add_option("--repeats", repeats, "repeats per mission (default 5)");
  cmd_bench->add_flag("--both-template-modes", both_modes, "run with and without the template");
  cmd_bench->add_flag("--no-template", bench_no_template, "run the raw-text mode only");
  cmd_bench->add_option("--provider", bench_provider, "live|mock (default mock)");
  cmd_bench->add_option("--out", bench_out, "output directory");

  // validate
  std::string validate_path;
  auto* cmd_validate = app.add_subcommand("validate", "check a mission file");
  cmd_validate->add_option("mission", validate_path, "mission file")->required();

  // replay
  std::string trace_path;
  auto* cmd_replay = app.add_subcommand("replay", "verify a recorded trace");
  cmd_replay->add_option("trace", trace_path, "trace.jsonl produced by run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_run) {
      mrplan::MissionSpec spec = mrplan::load_mission_file(mission_path);
      if (seed_override >= 0) {
        spec.sim_config.seed = static_cast<std::uint64_t>(seed_override);
        spec.world.rng_seed = spec.sim_config.seed;
      }
      auto provider = make_provider(provider_kind, playbook_path);
      mrplan::engine::EngineOptions opts;
      opts.use_template = !no_template;
      opts.out_dir = out_dir;
      opts.plot = plot;
      opts.prices = prices_from_env();
      mrplan::orchestrate::PromptLibrary prompts =
          prompts_dir.empty() ? mrplan::orchestrate::PromptLibrary::builtin()
                              : mrplan::orchestrate::PromptLibrary::from_dir(prompts_dir);
      opts.prompts = &prompts;
      const auto report = mrplan::engine::run_mission(spec, *provider, spec.sim_config, opts);
      std::cout << mrplan::engine::to_json(report).dump(2) << "\n";
      if (!report.success) {
        std::cerr << "mission " << report.mission_id << " failed: "
                  << mrplan::engine::to_string(report.reason)
                  << (report.failure_detail.empty() ? "" : " (" + report.failure_detail + ")")
                  << "\n";
        return 1;
      }
      return 0;
    }

    if (*cmd_bench) {
      mrplan::bench::BenchOptions opts;
      opts.repeats = repeats;
      opts.both_modes = both_modes;
      opts.with_template = !bench_no_template;
      opts.provider = bench_provider;
      opts.prices = prices_from_env();
      opts.out_dir = bench_out;
      const auto results = mrplan::bench::run_bench(dataset_dir, opts);
      for (const auto& r : results) std::cout << mrplan::bench::render_table(r) << "\n";
      return 0;
    }

    if (*cmd_validate) {
      try {
        const mrplan::MissionSpec spec = mrplan::load_mission_file(validate_path);
        const auto diags = mrplan::validate_mission(spec);
        if (diags.empty()) {
          std::cout << "ok: " << spec.mission_id << "\n";
          return 0;
        }
        for (const auto& d : diags) std::cout << "diagnostic: " << d << "\n";
        return 1;
      } catch (const mrplan::MissionParseError& e) {
        std::cout << "diagnostic: " << e.what() << "\n";
        return 1;
      }
    }

    if (*cmd_replay) {
      const auto verdict = mrplan::engine::replay(trace_path);
      std::cout << (verdict.match ? "match" : "mismatch") << ": " << verdict.message << "\n";
      if (!verdict.match && verdict.first_divergent_tick >= 0)
        std::cout << "first divergent tick: " << verdict.first_divergent_tick << "\n";
      return verdict.match ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
