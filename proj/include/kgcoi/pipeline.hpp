#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgcoi/bm25.hpp"
#include "kgcoi/chains.hpp"
#include "kgcoi/chat.hpp"
#include "kgcoi/dataset.hpp"
#include "kgcoi/verifier.hpp"

namespace kgcoi {

enum class Method { direct, cot, rag, kgcoi };

std::string_view to_string(Method m) noexcept;
/// Throws InvalidArgument.
Method method_from_string(std::string_view s);

struct Question {
  std::string id;
  EntityId head;
  EntityId tail;
  std::string text;
  std::optional<Label> gold;
  MaskSpec mask;
};

Question question_from(const DatasetInstance& inst);

/// Each flag removes one ingredient of the kgcoi method.
struct Ablation {
  bool no_kg = false;          // no relation chains anywhere
  bool no_literature = false;  // no enrichment, no retrieval
  bool no_enrichment = false;  // retrieve with the raw question
  bool no_cot = false;         // single-shot answer prompt, no reasoning

  bool any() const noexcept { return no_kg || no_literature || no_enrichment || no_cot; }
};

struct PipelineConfig {
  Method method = Method::kgcoi;
  GenerationConfig generation;
  GenerationConfig verification;  // always greedy
  std::size_t k = 2;
  std::size_t chain_limit = 50;
  std::size_t top_k = 5;
  std::size_t candidate_cap = 20;
  Ablation ablation;
  bool verify = true;
  int parallelism = 1;
  std::uint64_t base_seed = 0;

  /// Throws InvalidArgument.
  void validate() const;
};

/// Shared, read-only inputs. Each backend must be safe for concurrent use.
struct Resources {
  const KnowledgeGraph* graph = nullptr;
  const LitIndex* index = nullptr;
  const MentionExtractor* linker = nullptr;
  ChatBackend* enricher = nullptr;
  ChatBackend* generator = nullptr;
  ChatBackend* verifier = nullptr;
};

struct CallCounts {
  std::uint64_t enricher = 0;
  std::uint64_t generator = 0;
  std::uint64_t verifier = 0;
  std::uint64_t retrievals = 0;
  std::uint64_t chain_searches = 0;

  bool operator==(const CallCounts&) const = default;
};

struct RunRecord {
  std::string id;
  Method method = Method::kgcoi;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
  std::vector<RelationChain> chains;
  std::string query;
  bool query_fallback = false;
  std::vector<std::string> doc_ids;
  std::string generator_prompt;
  std::vector<std::string> steps;
  Label prediction = Label::no_relation;
  ConfidenceReport report;
  std::vector<ChatTranscript> transcripts;
  CallCounts calls;
  bool parse_failed = false;
  bool failed = false;
  int attempts = 0;
  std::string error;
};

struct AggregateRecord {
  std::string id;
  Method method = Method::kgcoi;
  std::size_t n = 0;
  std::vector<RunRecord> runs;
  Label voted = Label::no_relation;  // no_relation when every run failed
  std::array<std::size_t, 3> votes{};
  double confidence = 0.0;
  bool failed = false;
};

/// Run seed from (base seed, question id, run index).
std::uint64_t derive_seed(std::uint64_t base, std::string_view question_id, std::size_t run);

/// Plurality vote. Ties go to the larger summed confidence, then to the
/// earlier label in inhibit < no_relation < stimulate order.
Label vote(std::span<const Label> labels, std::span<const double> confidences);

/// "Neighbor relations:" block followed by a "Retrieved documents:" block;
/// an absent part is left out entirely.
std::string kg_context(std::optional<std::string_view> relations,
                       std::optional<std::string_view> documents);
std::string render_documents(const LitIndex& index, std::span<const SearchHit> hits);

/// LLM-E keywords for the question; falls back to the question text when the
/// reply has no usable keywords.
std::string enrich_query(const Question& q, std::string_view relations, ChatBackend& llm_e,
                         const GenerationConfig& cfg, bool* fallback = nullptr,
                         std::vector<ChatTranscript>* transcripts = nullptr);

/// One attempt sequence for one question against its masked view. Agent
/// failures trigger one instance-level retry; a second failure marks the
/// record failed with a no_relation prediction.
RunRecord run_instance(const Question& q, const GraphView& masked, const Resources& res,
                       const PipelineConfig& cfg, const GenerationConfig& gen);

AggregateRecord self_consistency(const Question& q, const GraphView& masked,
                                 const Resources& res, const PipelineConfig& cfg, std::size_t n);

/// Views for every question, built once.
std::map<std::string, GraphView> masked_views(const KnowledgeGraph& g,
                                              std::span<const Question> questions);

/// Every question under cfg, OpenMP over questions, results in id order.
/// n == 0 means greedy single runs.
std::vector<AggregateRecord> run_benchmark(std::span<const Question> questions,
                                           const Resources& res, const PipelineConfig& cfg,
                                           std::size_t n);
std::vector<AggregateRecord> run_benchmark_serial(std::span<const Question> questions,
                                                  const Resources& res,
                                                  const PipelineConfig& cfg, std::size_t n);

inline constexpr int kResultsSchemaVersion = 1;

nlohmann::json to_json(const RunRecord& r, const KnowledgeGraph& graph);
/// Greedy records (n == 0) serialize as a single run.
nlohmann::json to_json(const AggregateRecord& a, const KnowledgeGraph& graph, bool greedy);

void write_results(std::ostream& out, std::span<const AggregateRecord> records,
                   const KnowledgeGraph& graph, bool greedy);
void write_transcripts(std::ostream& out, std::span<const AggregateRecord> records);

}  // namespace kgcoi
