#include "kgcoi/prompts.hpp"

#include <algorithm>
#include <array>

#include "kgcoi/errors.hpp"
#include "prompt_assets.hpp"

namespace kgcoi {

namespace {

constexpr std::array<std::string_view, 4> kPlaceholders = {"question", "context", "relation",
                                                           "sentence"};

struct Slot {
  std::size_t begin;  // position of "{{"
  std::size_t end;    // one past "}}"
  std::string_view name;
};

template <typename Fn>
void scan_slots(std::string_view body, Fn&& fn) {
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    std::size_t close = body.find("}}", pos + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated placeholder");
    std::string_view name = body.substr(pos + 2, close - pos - 2);
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end())
      throw TemplateError("unknown placeholder {{" + std::string(name) + "}}");
    fn(Slot{pos, close + 2, name});
    pos = close + 2;
  }
}

}  // namespace

std::string_view to_string(AgentRole role) noexcept {
  switch (role) {
    case AgentRole::enricher:
      return "enricher";
    case AgentRole::generator:
      return "generator";
    case AgentRole::verifier:
      return "verifier";
  }
  return "generator";
}

std::string_view to_string(TemplateVariant variant) noexcept {
  switch (variant) {
    case TemplateVariant::direct:
      return "direct";
    case TemplateVariant::cot:
      return "cot";
    case TemplateVariant::rag:
      return "rag";
    case TemplateVariant::kgcoi:
      return "kgcoi";
    case TemplateVariant::enrich:
      return "enrich";
    case TemplateVariant::verify:
      return "verify";
  }
  return "direct";
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  scan_slots(body, [&](const Slot& s) {
    if (std::find(out.begin(), out.end(), s.name) == out.end()) out.emplace_back(s.name);
  });
  return out;
}

const PromptTemplate& builtin_template(TemplateVariant variant) {
  static const std::array<PromptTemplate, 6> templates = {
      PromptTemplate{AgentRole::generator, TemplateVariant::direct, std::string(assets::kDirect)},
      PromptTemplate{AgentRole::generator, TemplateVariant::cot, std::string(assets::kCot)},
      PromptTemplate{AgentRole::generator, TemplateVariant::rag, std::string(assets::kRag)},
      PromptTemplate{AgentRole::generator, TemplateVariant::kgcoi, std::string(assets::kKgcoi)},
      PromptTemplate{AgentRole::enricher, TemplateVariant::enrich, std::string(assets::kEnrich)},
      PromptTemplate{AgentRole::verifier, TemplateVariant::verify, std::string(assets::kVerify)},
  };
  return templates[static_cast<std::size_t>(variant)];
}

std::string render_prompt(const PromptTemplate& t, const Bindings& bindings) {
  std::string out;
  out.reserve(t.body.size());
  std::size_t copied = 0;
  scan_slots(t.body, [&](const Slot& s) {
    auto it = bindings.find(s.name);
    if (it == bindings.end())
      throw TemplateError("missing binding for placeholder {{" + std::string(s.name) + "}}");
    out.append(t.body, copied, s.begin - copied);
    out += it->second;
    copied = s.end;
  });
  out.append(t.body, copied, std::string::npos);
  return out;
}

}  // namespace kgcoi
