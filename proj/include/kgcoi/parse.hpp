#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kgcoi/types.hpp"

namespace kgcoi {

/// Label from the last "Answer:" in a completion. Brackets, quotes and
/// letter case are ignored; "no relation" reads as no_relation.
/// Throws ParseError carrying the raw text.
Label parse_answer(std::string_view raw);

/// Claims between "Reasoning:" and the final "Answer:". Splits on " | "
/// when present, otherwise on sentence ends. Empty when there is no
/// Reasoning section.
std::vector<std::string> parse_reasoning(std::string_view raw);

/// Search query from an enrichment completion with labels and quotes
/// stripped. Throws ParseError when nothing is left.
std::string parse_keywords(std::string_view raw);

/// yes -> true, no -> false, using the same tolerance as parse_answer.
bool parse_verdict(std::string_view raw);

}  // namespace kgcoi
