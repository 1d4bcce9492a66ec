#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kgcoi/bm25.hpp"
#include "kgcoi/chains.hpp"
#include "kgcoi/dataset.hpp"
#include "kgcoi/graph.hpp"
#include "kgcoi/linker.hpp"

namespace kgcoi::testing {

std::filesystem::path fixture(const std::string& name);
std::filesystem::path golden(const std::string& name);
std::string slurp(const std::filesystem::path& path);

KnowledgeGraph graph_from_rows(const std::string& tsv);
KnowledgeGraph toy_graph();
KnowledgeGraph case_graph();

/// Random graph with n entities and up to m triples (duplicates dropped).
KnowledgeGraph random_graph(std::uint64_t seed, std::size_t n, std::size_t m);

/// Larger graph for dataset sampling: each node links to a few others with
/// skewed publication counts and a mix of polar and neutral relations.
KnowledgeGraph synthetic_graph(std::uint64_t seed, std::size_t nodes);

// --- chain oracle ---------------------------------------------------------

/// "A>cause>B<associate<C": '>' for stored direction, '<' against it.
std::string chain_key(const RelationChain& c);
/// Every simple path of 1..k hops from head to tail over visible triples,
/// enumerated by plain recursion over the triple list.
std::set<std::string> brute_force_chains(const GraphView& view, const EntityId& head,
                                         const EntityId& tail, std::size_t k);

// --- BM25 oracle ----------------------------------------------------------

struct RefHit {
  std::string doc_id;
  double score;
};
/// Direct-formula BM25 over raw documents, no index. k1 = 1.2, b = 0.75.
std::vector<RefHit> reference_bm25(const std::vector<Document>& docs, const std::string& query,
                                   std::size_t top_k);

// --- linker oracle --------------------------------------------------------

/// Tries every lexicon surface at every token position; keeps the longest
/// match at the leftmost free position.
std::vector<Mention> brute_force_link(const std::string& text, const Lexicon& lex);

// --- metric oracle --------------------------------------------------------

struct RefMetrics {
  double accuracy;
  double macro_f1;
};
RefMetrics reference_metrics(const std::vector<Label>& gold, const std::vector<Label>& pred);

// --- dataset validator ----------------------------------------------------

/// Re-checks every instance against the unmasked graph; returns violations.
std::vector<std::string> validate_dataset(const KnowledgeGraph& g,
                                          const std::vector<DatasetInstance>& ds,
                                          const BuilderConfig& cfg);

}  // namespace kgcoi::testing
