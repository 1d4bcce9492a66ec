#include "kgcoi/types.hpp"

namespace kgcoi {

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::inhibit:
      return "inhibit";
    case Label::no_relation:
      return "no_relation";
    case Label::stimulate:
      return "stimulate";
  }
  return "no_relation";
}

std::optional<Label> label_from_string(std::string_view text) noexcept {
  for (Label l : kAllLabels) {
    if (to_string(l) == text) return l;
  }
  return std::nullopt;
}

std::optional<Label> polarity(const RelationType& relation) noexcept {
  const std::string& l = relation.label;
  if (l == "stimulate" || l == "positive_correlate") return Label::stimulate;
  if (l == "inhibit" || l == "negative_correlate") return Label::inhibit;
  return std::nullopt;
}

}  // namespace kgcoi
