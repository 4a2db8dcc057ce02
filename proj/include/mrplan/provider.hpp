#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrplan {

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct ProviderError : std::runtime_error {
  explicit ProviderError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Completion {
  std::string response;
  Usage usage;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual Completion complete(const std::string& stage_tag, const std::string& prompt) = 0;
};

// Rough deterministic tokenizer stand-in: ceil(len/4).
std::int64_t estimate_tokens(const std::string& text);

// Playbook-driven mock. Entries are consumed per stage tag in file order, so
// the reply to the k-th call of a stage is the k-th entry with that stage.
// Entries may carry explicit usage numbers; otherwise usage is estimated.
class ScriptedProvider : public Provider {
 public:
  static ScriptedProvider from_file(const std::string& path);
  static ScriptedProvider from_json(const nlohmann::json& playbook);

  Completion complete(const std::string& stage_tag, const std::string& prompt) override;

  const nlohmann::json& annotation() const;
  bool exhausted() const;

 private:
  struct Entry {
    std::string response;
    std::optional<Usage> usage;
  };
  std::map<std::string, std::vector<Entry>> entries_;
  std::map<std::string, size_t> cursor_;
  std::shared_ptr<nlohmann::json> annotation_;
};

// OpenAI-style chat-completions backend. Configuration via explicit fields or
// the MRPLAN_LLM_URL / MRPLAN_LLM_MODEL / MRPLAN_LLM_KEY environment
// variables.
struct LiveProviderConfig {
  std::string base_url;  // e.g. http://host:port (path /v1/chat/completions appended)
  std::string model;
  std::string api_key;
  double price_per_input_token = 0.0;
  double price_per_output_token = 0.0;

  static LiveProviderConfig from_env();
};

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(LiveProviderConfig config);
  Completion complete(const std::string& stage_tag, const std::string& prompt) override;

 private:
  LiveProviderConfig config_;
};

struct TranscriptRecord {
  std::string stage;
  std::string prompt;
  std::string response;
  Usage usage;
  bool validation_ok = true;
  int attempt = 0;  // 0 = first try, 1.. = repair attempts
  std::string error;
};

struct Transcript {
  std::vector<TranscriptRecord> records;

  void add(TranscriptRecord rec) { records.push_back(std::move(rec)); }
  bool has_stage(const std::string& stage) const;
  int count_stage(const std::string& stage) const;
};

nlohmann::json to_json(const TranscriptRecord& r);
TranscriptRecord transcript_record_from_json(const nlohmann::json& j);

}  // namespace mrplan
