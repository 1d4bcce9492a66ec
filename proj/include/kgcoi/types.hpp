#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace kgcoi {

/// Three-way hypothesis label. Enumerator order is the fixed tie-break order
/// used by self-consistency voting.
enum class Label { inhibit = 0, no_relation = 1, stimulate = 2 };

inline constexpr std::array<Label, 3> kAllLabels = {Label::inhibit, Label::no_relation,
                                                    Label::stimulate};

std::string_view to_string(Label label) noexcept;
/// Exact canonical spelling only ("inhibit", "no_relation", "stimulate").
std::optional<Label> label_from_string(std::string_view text) noexcept;

/// Opaque curie-style entity identifier.
struct EntityId {
  std::string value;

  EntityId() = default;
  explicit EntityId(std::string v) : value(std::move(v)) {}

  bool empty() const noexcept { return value.empty(); }
  auto operator<=>(const EntityId&) const = default;
};

struct RelationType {
  std::string label;

  RelationType() = default;
  explicit RelationType(std::string l) : label(std::move(l)) {}

  auto operator<=>(const RelationType&) const = default;
};

/// Polarity carried by a relation label, if any. positive_correlate and
/// negative_correlate read as stimulate and inhibit respectively.
std::optional<Label> polarity(const RelationType& relation) noexcept;

}  // namespace kgcoi
