#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgcoi/prompts.hpp"

namespace kgcoi {

/// Decoding settings for one call. temperature == 0 means greedy.
struct GenerationConfig {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::uint64_t> seed;

  bool greedy() const noexcept { return temperature == 0.0; }
  /// Throws InvalidArgument for negative temperature or non-positive max_tokens.
  void validate() const;
};

struct ChatRequest {
  AgentRole role = AgentRole::generator;
  std::string system;
  std::string user;
};

struct Usage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::uint64_t total_tokens = 0;
};

/// Record of a single completion call. `raw` is kept byte-exact.
struct ChatTranscript {
  AgentRole role = AgentRole::generator;
  std::string model;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
  std::string system;
  std::string user;
  std::string raw;
  Usage usage;
  double latency_ms = 0.0;
  int retries = 0;
};

nlohmann::json to_json(const ChatTranscript& t);

class ChatBackend {
public:
  virtual ~ChatBackend() = default;
  virtual ChatTranscript complete(const ChatRequest& request, const GenerationConfig& cfg) = 0;
};

inline ChatTranscript complete(ChatBackend& backend, const ChatRequest& request,
                               const GenerationConfig& cfg) {
  return backend.complete(request, cfg);
}

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP transport

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{16000};

  /// base_delay * 2^attempt, capped at max_delay.
  std::chrono::milliseconds backoff(int attempt) const;
};

/// 408, 429 and 5xx are worth retrying; any other non-2xx is final.
bool is_retryable_status(int status) noexcept;

/// Endpoint settings. The API key itself is only ever read from the
/// environment variable named by api_key_env.
struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::map<AgentRole, std::string> models = {{AgentRole::enricher, "gpt-4o-mini"},
                                             {AgentRole::generator, "gpt-4o-mini"},
                                             {AgentRole::verifier, "gpt-4o-mini"}};
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
  int concurrency = 4;
  double requests_per_second = 0.0;  // 0 = unlimited

  /// `key = value` lines; '#' starts a comment. Unknown keys are errors.
  static EndpointConfig parse(std::istream& in);
  /// Overrides from KGCOI_BASE_URL, KGCOI_API_KEY_ENV, KGCOI_MODEL.
  void apply_environment();
};

class HttpChatBackend final : public ChatBackend {
public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatBackend(EndpointConfig config, Sleeper sleeper = {});
  ~HttpChatBackend() override;

  ChatTranscript complete(const ChatRequest& request, const GenerationConfig& cfg) override;

  /// Request body sent for a call; exposed for tests.
  static std::string request_body(const ChatRequest& request, const GenerationConfig& cfg);

private:
  EndpointConfig config_;
  Sleeper sleeper_;
  std::string api_key_;
  std::counting_semaphore<1 << 20> in_flight_;
  std::mutex pace_mu_;
  std::chrono::steady_clock::time_point next_slot_{};

  void pace();
};

// ---------------------------------------------------------------------------
// Deterministic mock backends

/// One scripted reply. A rule matches when the role agrees (if given) and the
/// prompt contains `contains`. With several responses the one at
/// seed % size is used, so replies depend on request content only.
struct ScriptRule {
  std::optional<AgentRole> role;
  std::string contains;
  std::vector<std::string> responses;
  bool fail_transport = false;
};

class ScriptedBackend final : public ChatBackend {
public:
  explicit ScriptedBackend(std::vector<ScriptRule> rules, ChatBackend* fallback = nullptr);

  /// JSON lines: {"role"?, "contains"?, "response" | "responses", "fail"?: "transport"}.
  static std::vector<ScriptRule> parse_rules(std::istream& in);

  ChatTranscript complete(const ChatRequest& request, const GenerationConfig& cfg) override;

  std::uint64_t calls(AgentRole role) const noexcept;

private:
  std::vector<ScriptRule> rules_;
  ChatBackend* fallback_;
  std::array<std::atomic<std::uint64_t>, 3> calls_{};
};

class KnowledgeGraph;

/// Answers from an unmasked reference graph. The generator only "knows" the
/// hidden relation when the prompt carries neighbor relations, and then
/// replays those relations as its reasoning. The verifier affirms a relation
/// when the statement names both of its entities.
class RuleBasedBackend final : public ChatBackend {
public:
  /// noise: probability of a flipped label on sampled (temperature > 0) calls.
  explicit RuleBasedBackend(const KnowledgeGraph& reference, double noise = 0.0);

  ChatTranscript complete(const ChatRequest& request, const GenerationConfig& cfg) override;

  std::uint64_t calls(AgentRole role) const noexcept;

private:
  const KnowledgeGraph* graph_;
  double noise_;
  std::map<std::string, std::uint32_t> by_name_;
  std::array<std::atomic<std::uint64_t>, 3> calls_{};

  std::string generate(const std::string& prompt, const GenerationConfig& cfg) const;
  std::string enrich(const std::string& prompt) const;
  std::string verify(const std::string& prompt) const;
};

}  // namespace kgcoi
