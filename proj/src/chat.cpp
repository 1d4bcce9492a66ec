#include "kgcoi/chat.hpp"

#include <cstdlib>
#include <istream>
#include <thread>

#include <json.hpp>

#include "kgcoi/errors.hpp"
#include "kgcoi/text.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace kgcoi {

void GenerationConfig::validate() const {
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  if (max_tokens <= 0) throw InvalidArgument("max_tokens must be positive");
}

nlohmann::json to_json(const ChatTranscript& t) {
  nlohmann::json j{{"role", to_string(t.role)},
                   {"model", t.model},
                   {"temperature", t.temperature},
                   {"system", t.system},
                   {"prompt", t.user},
                   {"completion", t.raw},
                   {"usage",
                    {{"prompt_tokens", t.usage.prompt_tokens},
                     {"completion_tokens", t.usage.completion_tokens},
                     {"total_tokens", t.usage.total_tokens}}},
                   {"latency_ms", t.latency_ms},
                   {"retries", t.retries}};
  j["seed"] = t.seed ? nlohmann::json(*t.seed) : nlohmann::json(nullptr);
  return j;
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  auto delay = base_delay;
  for (int i = 0; i < attempt && delay < max_delay; ++i) delay *= 2;
  return std::min(delay, max_delay);
}

bool is_retryable_status(int status) noexcept {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

namespace {

std::optional<AgentRole> role_from_string(std::string_view s) {
  for (AgentRole r : {AgentRole::enricher, AgentRole::generator, AgentRole::verifier}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

int to_int(std::string_view key, std::string_view value) {
  try {
    return std::stoi(std::string(value));
  } catch (const std::exception&) {
    throw ParseError("endpoint config: '" + std::string(key) + "' expects an integer");
  }
}

}  // namespace

EndpointConfig EndpointConfig::parse(std::istream& in) {
  EndpointConfig cfg;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = text::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("endpoint config line " + std::to_string(number) + ": expected key = value");
    std::string key(text::trim(s.substr(0, eq)));
    std::string value(text::trim(s.substr(eq + 1)));
    if (key == "base_url") {
      cfg.base_url = value;
    } else if (key == "api_key_env") {
      cfg.api_key_env = value;
    } else if (key == "model") {
      for (auto& [role, model] : cfg.models) model = value;
    } else if (key.starts_with("model.")) {
      auto role = role_from_string(std::string_view(key).substr(6));
      if (!role) throw ParseError("endpoint config: unknown role in '" + key + "'");
      cfg.models[*role] = value;
    } else if (key == "timeout_ms") {
      cfg.timeout = std::chrono::milliseconds(to_int(key, value));
    } else if (key == "retry_cap") {
      cfg.retry.max_retries = to_int(key, value);
    } else if (key == "retry_base_ms") {
      cfg.retry.base_delay = std::chrono::milliseconds(to_int(key, value));
    } else if (key == "retry_max_ms") {
      cfg.retry.max_delay = std::chrono::milliseconds(to_int(key, value));
    } else if (key == "concurrency") {
      cfg.concurrency = to_int(key, value);
    } else if (key == "requests_per_second") {
      try {
        cfg.requests_per_second = std::stod(value);
      } catch (const std::exception&) {
        throw ParseError("endpoint config: 'requests_per_second' expects a number");
      }
    } else if (key == "api_key") {
      throw ParseError("endpoint config: API keys are read from the environment only");
    } else {
      throw ParseError("endpoint config: unknown key '" + key + "'");
    }
  }
  if (cfg.concurrency < 1) throw ParseError("endpoint config: concurrency must be >= 1");
  return cfg;
}

void EndpointConfig::apply_environment() {
  if (const char* v = std::getenv("KGCOI_BASE_URL")) base_url = v;
  if (const char* v = std::getenv("KGCOI_API_KEY_ENV")) api_key_env = v;
  if (const char* v = std::getenv("KGCOI_MODEL")) {
    for (auto& [role, model] : models) model = v;
  }
}

HttpChatBackend::HttpChatBackend(EndpointConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      sleeper_(std::move(sleeper)),
      in_flight_(std::max(1, config_.concurrency)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::request_body(const ChatRequest& request, const GenerationConfig& cfg) {
  nlohmann::json messages = nlohmann::json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", request.user}});
  nlohmann::json body{{"model", cfg.model},
                      {"messages", messages},
                      {"temperature", cfg.temperature},
                      {"max_tokens", cfg.max_tokens}};
  if (cfg.seed) body["seed"] = *cfg.seed;
  return body.dump();
}

void HttpChatBackend::pace() {
  if (config_.requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config_.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

ChatTranscript HttpChatBackend::complete(const ChatRequest& request,
                                         const GenerationConfig& requested) {
  requested.validate();
  GenerationConfig cfg = requested;
  if (auto it = config_.models.find(request.role); it != config_.models.end()) cfg.model = it->second;
  // Split "scheme://host[:port]/prefix" for httplib.
  const std::string& url = config_.base_url;
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  std::string origin = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const std::string body = request_body(request, cfg);
  ChatTranscript t;
  t.role = request.role;
  t.model = cfg.model;
  t.temperature = cfg.temperature;
  t.seed = cfg.seed;
  t.system = request.system;
  t.user = request.user;

  std::string last_failure;
  for (int attempt = 0;; ++attempt) {
    in_flight_.acquire();
    pace();
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(prefix + "/chat/completions", headers, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - started;
    in_flight_.release();

    std::chrono::milliseconds wait{0};
    if (!res) {
      last_failure = "transport failure: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      try {
        auto j = nlohmann::json::parse(res->body);
        t.raw = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
          const auto& u = j["usage"];
          t.usage.prompt_tokens = u.value("prompt_tokens", std::uint64_t{0});
          t.usage.completion_tokens = u.value("completion_tokens", std::uint64_t{0});
          t.usage.total_tokens = u.value("total_tokens", std::uint64_t{0});
        }
      } catch (const nlohmann::json::exception& e) {
        throw EndpointError(res->status, std::string("unreadable completion body: ") + e.what());
      }
      t.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
      t.retries = attempt;
      return t;
    } else if (is_retryable_status(res->status)) {
      last_failure = "status " + std::to_string(res->status) + ": " + res->body;
      if (res->has_header("Retry-After")) {
        try {
          wait = std::chrono::seconds(std::stoi(res->get_header_value("Retry-After")));
        } catch (const std::exception&) {
        }
      }
    } else {
      throw EndpointError(res->status, res->body);
    }

    if (attempt >= config_.retry.max_retries) {
      throw TransportError("giving up after " + std::to_string(attempt) + " retries; last " +
                           last_failure);
    }
    sleeper_(std::min(std::max(wait, config_.retry.backoff(attempt)), config_.retry.max_delay));
  }
}

}  // namespace kgcoi
