#include "mrplan/provider.hpp"

#include <nlohmann/json.hpp>

// httplib pulls in sockets; keep it out of the public header.
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

namespace mrplan {

std::int64_t estimate_tokens(const std::string& text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

ScriptedProvider ScriptedProvider::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProviderError("cannot open playbook: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderError("playbook is not valid JSON: " + std::string(e.what()));
  }
  return from_json(j);
}

ScriptedProvider ScriptedProvider::from_json(const nlohmann::json& playbook) {
  ScriptedProvider p;
  p.annotation_ = std::make_shared<nlohmann::json>(
      playbook.contains("annotation") ? playbook.at("annotation") : nlohmann::json::object());
  if (!playbook.contains("entries") || !playbook.at("entries").is_array())
    throw ProviderError("playbook lacks an 'entries' array");
  for (const auto& e : playbook.at("entries")) {
    if (!e.contains("stage")) throw ProviderError("playbook entry lacks 'stage'");
    Entry entry;
    const auto& resp = e.at("response");
    // Structured responses are stored as JSON for readability; strings pass
    // through verbatim (useful for malformed-output injection).
    entry.response = resp.is_string() ? resp.get<std::string>() : resp.dump();
    if (e.contains("usage")) {
      Usage u;
      u.input_tokens = e.at("usage").value("input_tokens", 0);
      u.output_tokens = e.at("usage").value("output_tokens", 0);
      entry.usage = u;
    }
    p.entries_[e.at("stage").get<std::string>()].push_back(std::move(entry));
  }
  return p;
}

Completion ScriptedProvider::complete(const std::string& stage_tag, const std::string& prompt) {
  auto it = entries_.find(stage_tag);
  const size_t used = cursor_[stage_tag];
  if (it == entries_.end() || used >= it->second.size())
    throw ProviderError("playbook exhausted for stage '" + stage_tag + "' (call #" +
                        std::to_string(used + 1) + ")");
  cursor_[stage_tag] = used + 1;
  const Entry& entry = it->second[used];
  Completion c;
  c.response = entry.response;
  c.usage = entry.usage.value_or(
      Usage{estimate_tokens(prompt), estimate_tokens(entry.response)});
  return c;
}

const nlohmann::json& ScriptedProvider::annotation() const { return *annotation_; }

bool ScriptedProvider::exhausted() const {
  for (const auto& [stage, list] : entries_) {
    const auto it = cursor_.find(stage);
    if (it == cursor_.end() || it->second < list.size()) return false;
  }
  return true;
}

LiveProviderConfig LiveProviderConfig::from_env() {
  LiveProviderConfig cfg;
  if (const char* v = std::getenv("MRPLAN_LLM_URL")) cfg.base_url = v;
  if (const char* v = std::getenv("MRPLAN_LLM_MODEL")) cfg.model = v;
  if (const char* v = std::getenv("MRPLAN_LLM_KEY")) cfg.api_key = v;
  if (const char* v = std::getenv("MRPLAN_LLM_PRICE_IN")) cfg.price_per_input_token = std::atof(v);
  if (const char* v = std::getenv("MRPLAN_LLM_PRICE_OUT"))
    cfg.price_per_output_token = std::atof(v);
  return cfg;
}

HttpProvider::HttpProvider(LiveProviderConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty())
    throw ProviderError("live provider needs a base URL (MRPLAN_LLM_URL)");
  if (config_.model.empty()) throw ProviderError("live provider needs a model (MRPLAN_LLM_MODEL)");
}

Completion HttpProvider::complete(const std::string& stage_tag, const std::string& prompt) {
  httplib::Client client(config_.base_url);
  client.set_read_timeout(300, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array(
      {{{"role", "user"}, {"content", prompt}}});
  body["metadata"] = {{"stage", stage_tag}};

  const auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!res)
    throw ProviderError("live provider unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw ProviderError("live provider returned HTTP " + std::to_string(res->status) + ": " +
                        res->body);
  try {
    const nlohmann::json j = nlohmann::json::parse(res->body);
    Completion c;
    c.response = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      c.usage.input_tokens = j.at("usage").value("prompt_tokens", 0);
      c.usage.output_tokens = j.at("usage").value("completion_tokens", 0);
    } else {
      c.usage = {estimate_tokens(prompt), estimate_tokens(c.response)};
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError("live provider response malformed: " + std::string(e.what()));
  }
}

bool Transcript::has_stage(const std::string& stage) const {
  for (const auto& r : records)
    if (r.stage == stage) return true;
  return false;
}

int Transcript::count_stage(const std::string& stage) const {
  int n = 0;
  for (const auto& r : records)
    if (r.stage == stage) ++n;
  return n;
}

nlohmann::json to_json(const TranscriptRecord& r) {
  return {{"stage", r.stage},
          {"prompt", r.prompt},
          {"response", r.response},
          {"usage", {{"input_tokens", r.usage.input_tokens}, {"output_tokens", r.usage.output_tokens}}},
          {"validation_ok", r.validation_ok},
          {"attempt", r.attempt},
          {"error", r.error}};
}

TranscriptRecord transcript_record_from_json(const nlohmann::json& j) {
  TranscriptRecord r;
  r.stage = j.at("stage").get<std::string>();
  r.prompt = j.value("prompt", std::string{});
  r.response = j.value("response", std::string{});
  if (j.contains("usage")) {
    r.usage.input_tokens = j.at("usage").value("input_tokens", 0);
    r.usage.output_tokens = j.at("usage").value("output_tokens", 0);
  }
  r.validation_ok = j.value("validation_ok", true);
  r.attempt = j.value("attempt", 0);
  r.error = j.value("error", std::string{});
  return r;
}

}  // namespace mrplan
