#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgcoi/chat.hpp"
#include "kgcoi/graph.hpp"
#include "kgcoi/linker.hpp"

namespace kgcoi {

/// LLM-V ruling on one (triple, step) pair.
struct TripleVerdict {
  Triple triple;
  bool affirmed = false;
  bool parse_failed = false;
};

struct StepVerdict {
  std::size_t step_index = 0;  // 1-based
  std::string step_text;
  std::vector<Mention> mentions;
  std::vector<Triple> candidate_triples;
  std::vector<TripleVerdict> adjudications;
  std::optional<Triple> supporting_triple;
  bool correct = false;
  bool verify_failed = false;
  std::string error;
  std::vector<ChatTranscript> transcripts;
};

struct ConfidenceReport {
  std::vector<StepVerdict> verdicts;
  double confidence = 0.0;
};

struct VerifierOptions {
  std::size_t candidate_cap = 20;
  GenerationConfig generation;  // greedy unless changed
  bool parallel_steps = false;
};

/// Direct triples between every unordered pair of distinct mentioned
/// entities, in canonical order, truncated to `cap`.
std::vector<std::uint32_t> candidate_triples(const GraphView& view,
                                             std::span<const Mention> mentions, std::size_t cap);

/// "(head_name, relation, tail_name)" in stored orientation.
std::string render_triple(const Triple& t, const KnowledgeGraph& graph);

/// Links the step, gathers candidates, and asks LLM-V about each in turn
/// until one is affirmed. Transport or endpoint failures end adjudication
/// with verify_failed set and correct = false.
StepVerdict verify_step(std::string_view step, std::size_t step_index, const GraphView& view,
                        const MentionExtractor& linker, ChatBackend& llm_v,
                        const VerifierOptions& options = {});

/// Mean correctness; 0 for no verdicts.
double confidence(std::span<const StepVerdict> verdicts);
double confidence(std::span<const bool> correctness);

ConfidenceReport verify_chain(std::span<const std::string> steps, const GraphView& view,
                              const MentionExtractor& linker, ChatBackend& llm_v,
                              const VerifierOptions& options = {});

nlohmann::json to_json(const StepVerdict& verdict, const KnowledgeGraph& graph);
nlohmann::json to_json(const Triple& t);

/// One JSON line per step, tagged with the question id.
void write_verification_log(std::ostream& out, std::string_view question_id,
                            const ConfidenceReport& report, const KnowledgeGraph& graph);

}  // namespace kgcoi
