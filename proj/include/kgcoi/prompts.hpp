#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kgcoi/types.hpp"

namespace kgcoi {

enum class AgentRole { enricher, generator, verifier };
enum class TemplateVariant { direct, cot, rag, kgcoi, enrich, verify };

std::string_view to_string(AgentRole role) noexcept;
std::string_view to_string(TemplateVariant variant) noexcept;

/// Template body with {{question}}, {{context}}, {{relation}} and
/// {{sentence}} placeholders.
struct PromptTemplate {
  AgentRole role = AgentRole::generator;
  TemplateVariant variant = TemplateVariant::direct;
  std::string body;

  /// Distinct placeholder names in order of first appearance. Throws
  /// TemplateError for names outside the four supported ones.
  std::vector<std::string> placeholders() const;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

/// The shipped template for a variant, compiled in from assets/prompts.
const PromptTemplate& builtin_template(TemplateVariant variant);

/// Byte-exact placeholder substitution. Bound values are inserted verbatim
/// and never rescanned. Throws TemplateError naming the first unbound
/// placeholder.
std::string render_prompt(const PromptTemplate& t, const Bindings& bindings);

}  // namespace kgcoi
