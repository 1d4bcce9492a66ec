#include "kgcoi/chat.hpp"

#include <istream>

#include <json.hpp>

#include "kgcoi/errors.hpp"
#include "kgcoi/graph.hpp"
#include "kgcoi/linker.hpp"
#include "kgcoi/text.hpp"

namespace kgcoi {

namespace {

std::size_t role_slot(AgentRole role) { return static_cast<std::size_t>(role); }

Usage rough_usage(std::string_view prompt, std::string_view completion) {
  auto words = [](std::string_view s) {
    std::uint64_t n = 0;
    bool in_word = false;
    for (char c : s) {
      bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
      if (!space && !in_word) ++n;
      in_word = !space;
    }
    return n;
  };
  Usage u;
  u.prompt_tokens = words(prompt);
  u.completion_tokens = words(completion);
  u.total_tokens = u.prompt_tokens + u.completion_tokens;
  return u;
}

ChatTranscript make_transcript(const ChatRequest& request, const GenerationConfig& cfg,
                               std::string raw) {
  ChatTranscript t;
  t.role = request.role;
  t.model = cfg.model;
  t.temperature = cfg.temperature;
  t.seed = cfg.seed;
  t.system = request.system;
  t.user = request.user;
  t.usage = rough_usage(request.user, raw);
  t.raw = std::move(raw);
  return t;
}

std::optional<AgentRole> parse_role(const std::string& s) {
  for (AgentRole r : {AgentRole::enricher, AgentRole::generator, AgentRole::verifier}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

// FNV-1a; stable across platforms so mock replies never depend on the STL.
std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, ChatBackend* fallback)
    : rules_(std::move(rules)), fallback_(fallback) {}

std::vector<ScriptRule> ScriptedBackend::parse_rules(std::istream& in) {
  std::vector<ScriptRule> rules;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    const std::string where = "script line " + std::to_string(number) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
    if (!j.is_object()) throw ParseError(where + "expected an object");
    ScriptRule rule;
    try {
      if (j.contains("role")) {
        rule.role = parse_role(j["role"].get<std::string>());
        if (!rule.role) throw ParseError(where + "unknown role");
      }
      rule.contains = j.value("contains", std::string{});
      if (j.contains("response")) rule.responses.push_back(j["response"].get<std::string>());
      if (j.contains("responses")) {
        for (const auto& r : j["responses"]) rule.responses.push_back(r.get<std::string>());
      }
      if (j.contains("fail")) {
        if (j["fail"] != "transport") throw ParseError(where + "fail must be \"transport\"");
        rule.fail_transport = true;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
    if (rule.responses.empty() && !rule.fail_transport)
      throw ParseError(where + "rule has no response");
    rules.push_back(std::move(rule));
  }
  return rules;
}

ChatTranscript ScriptedBackend::complete(const ChatRequest& request, const GenerationConfig& cfg) {
  cfg.validate();
  calls_[role_slot(request.role)].fetch_add(1, std::memory_order_relaxed);
  for (const ScriptRule& rule : rules_) {
    if (rule.role && *rule.role != request.role) continue;
    if (request.user.find(rule.contains) == std::string::npos) continue;
    if (rule.fail_transport) throw TransportError("scripted transport failure");
    const std::uint64_t pick = cfg.seed.value_or(0) % rule.responses.size();
    return make_transcript(request, cfg, rule.responses[pick]);
  }
  if (fallback_ != nullptr) return fallback_->complete(request, cfg);
  throw EndpointError(404, "no scripted response for " + std::string(to_string(request.role)) +
                               " prompt");
}

std::uint64_t ScriptedBackend::calls(AgentRole role) const noexcept {
  return calls_[role_slot(role)].load(std::memory_order_relaxed);
}

// ---------------------------------------------------------------------------

RuleBasedBackend::RuleBasedBackend(const KnowledgeGraph& reference, double noise)
    : graph_(&reference), noise_(noise) {
  if (noise < 0.0 || noise > 1.0) throw InvalidArgument("noise must lie in [0, 1]");
  for (std::uint32_t i = 0; i < reference.entity_count(); ++i) {
    by_name_.emplace(normalize_surface(reference.entity_at(i).name), i);
  }
}

std::uint64_t RuleBasedBackend::calls(AgentRole role) const noexcept {
  return calls_[role_slot(role)].load(std::memory_order_relaxed);
}

ChatTranscript RuleBasedBackend::complete(const ChatRequest& request, const GenerationConfig& cfg) {
  cfg.validate();
  calls_[role_slot(request.role)].fetch_add(1, std::memory_order_relaxed);
  std::string raw;
  switch (request.role) {
    case AgentRole::enricher:
      raw = enrich(request.user);
      break;
    case AgentRole::generator:
      raw = generate(request.user, cfg);
      break;
    case AgentRole::verifier:
      raw = verify(request.user);
      break;
  }
  return make_transcript(request, cfg, std::move(raw));
}

namespace {

constexpr std::string_view kAsk = "Can we hypothesize a key relation between ";

// Entity pair named by the last question in the prompt. Names may contain
// " and ", so every split point is tried against the name index.
std::optional<std::pair<std::uint32_t, std::uint32_t>> question_pair(
    std::string_view prompt, const std::map<std::string, std::uint32_t>& by_name) {
  std::size_t at = prompt.rfind(kAsk);
  if (at == std::string_view::npos) return std::nullopt;
  std::string_view rest = prompt.substr(at + kAsk.size());
  rest = rest.substr(0, rest.find('?'));
  for (std::size_t pos = rest.find(" and "); pos != std::string_view::npos;
       pos = rest.find(" and ", pos + 1)) {
    auto a = by_name.find(normalize_surface(rest.substr(0, pos)));
    auto b = by_name.find(normalize_surface(rest.substr(pos + 5)));
    if (a != by_name.end() && b != by_name.end()) return std::pair{a->second, b->second};
  }
  return std::nullopt;
}

std::string answer_line(Label label) { return "Answer: ['" + std::string(to_string(label)) + "']"; }

}  // namespace

std::string RuleBasedBackend::enrich(const std::string& prompt) const {
  auto pair = question_pair(prompt, by_name_);
  if (!pair) return "Keywords:";
  return "Keywords: " + graph_->entity_at(pair->first).name + " " +
         graph_->entity_at(pair->second).name;
}

std::string RuleBasedBackend::generate(const std::string& prompt,
                                       const GenerationConfig& cfg) const {
  const bool wants_reasoning = prompt.find("your_reasoning_steps") != std::string::npos;
  auto pair = question_pair(prompt, by_name_);

  // Neighbor relations block written by the pipeline, one chain per line.
  constexpr std::string_view kBlock = "Neighbor relations:\n";
  std::vector<std::string> hops;
  if (std::size_t at = prompt.find(kBlock); at != std::string::npos) {
    std::string_view rest = std::string_view(prompt).substr(at + kBlock.size());
    while (!rest.empty() && rest.front() == '(') {
      std::string_view line = rest.substr(0, rest.find('\n'));
      rest.remove_prefix(std::min(rest.size(), line.size() + 1));
      for (std::size_t pos = 0; pos < line.size();) {
        std::size_t close = line.find(')', pos);
        if (close == std::string_view::npos) break;
        std::string hop(line.substr(pos, close + 1 - pos));
        if (std::find(hops.begin(), hops.end(), hop) == hops.end()) hops.push_back(hop);
        pos = close + 1;
        while (pos < line.size() && (line[pos] == ',' || line[pos] == ' ')) ++pos;
      }
    }
  }

  Label label = Label::no_relation;
  if (pair && !hops.empty()) {
    const Entity& a = graph_->entity_at(pair->first);
    const Entity& b = graph_->entity_at(pair->second);
    // Strongest polar relation in the unmasked reference graph.
    for (const Triple& t : graph_->view().direct_relations(a.id, b.id)) {
      if (auto p = polarity(t.relation)) {
        label = *p;
        break;
      }
    }
  }

  if (!cfg.greedy() && noise_ > 0.0) {
    std::uint64_t h = fnv1a(prompt);
    h = fnv1a(std::to_string(cfg.seed.value_or(0)), h);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    if (u < noise_) {
      const auto shift = 1 + static_cast<int>((h & 1U));
      label = static_cast<Label>((static_cast<int>(label) + shift) % 3);
    }
  }

  if (!wants_reasoning) return answer_line(label);
  std::string reasoning;
  if (!hops.empty()) {
    const std::size_t n = std::min<std::size_t>(hops.size(), 10);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) reasoning += " | ";
      reasoning += hops[i];
    }
  } else if (pair) {
    reasoning = "No established link connects " + graph_->entity_at(pair->first).name + " and " +
                graph_->entity_at(pair->second).name + ".";
  } else {
    reasoning = "The question names no known entities.";
  }
  return "Reasoning: " + reasoning + "\n" + answer_line(label);
}

std::string RuleBasedBackend::verify(const std::string& prompt) const {
  constexpr std::string_view kRelation = "Relation: (";
  constexpr std::string_view kStatement = "Statement: ";
  std::size_t r = prompt.rfind(kRelation);
  std::size_t s = prompt.rfind(kStatement);
  if (r == std::string::npos || s == std::string::npos) return "Answer: ['no']";
  std::string_view rel = std::string_view(prompt).substr(r + kRelation.size());
  rel = rel.substr(0, rel.find(')'));
  auto parts = text::split(rel, ',');
  if (parts.size() < 3) return "Answer: ['no']";
  std::string head = normalize_surface(parts.front());
  std::string tail = normalize_surface(parts.back());
  std::string statement = " " + normalize_surface(std::string_view(prompt).substr(s)) + " ";
  const bool yes = !head.empty() && !tail.empty() &&
                   statement.find(" " + head + " ") != std::string::npos &&
                   statement.find(" " + tail + " ") != std::string::npos;
  return std::string("Reasoning: The relation ") + (yes ? "names" : "does not name") +
         " both entities of the statement.\nAnswer: ['" + (yes ? "yes" : "no") + "']";
}

}  // namespace kgcoi
