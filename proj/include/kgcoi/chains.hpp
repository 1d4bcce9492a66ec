#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kgcoi/graph.hpp"

namespace kgcoi {

/// One step of a relation chain. `forward` is true when the stored triple
/// points the same way the chain is walked.
struct Hop {
  RelationType relation;
  bool forward = true;

  auto operator<=>(const Hop&) const = default;
};

/// Simple path e_0 -r_1- e_1 ... -r_m- e_m between two query entities.
struct RelationChain {
  std::vector<EntityId> entities;
  std::vector<Hop> hops;
  std::uint64_t total_pubs = 0;

  std::size_t length() const noexcept { return hops.size(); }

  /// The stored (head, relation, tail) behind hop i.
  Triple hop_triple(std::size_t i) const;

  bool operator==(const RelationChain&) const = default;
};

/// Ranking used for truncation: shorter first, then more publications,
/// then lexical on entities and hops.
bool chain_rank_less(const RelationChain& a, const RelationChain& b);

struct ChainQuery {
  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

  EntityId head;
  EntityId tail;
  std::size_t k = 2;
  std::size_t limit = 50;
};

/// All simple paths of at most q.k hops between q.head and q.tail in the
/// view, expanded level by level. Throws NotFoundError for unknown endpoints
/// and InvalidArgument for a degenerate query.
std::vector<RelationChain> find_chains(const GraphView& view, const ChainQuery& q);

/// find_chains over many queries against one view, one query per OpenMP task.
std::vector<std::vector<RelationChain>> find_chains_batch(const GraphView& view,
                                                          std::span<const ChainQuery> queries);
/// Single-threaded reference for find_chains_batch.
std::vector<std::vector<RelationChain>> find_chains_batch_serial(
    const GraphView& view, std::span<const ChainQuery> queries);

/// "(head_name, relation, tail_name)" per hop in walk order, hops joined by
/// ", ", chains by newline.
std::string render_chains(std::span<const RelationChain> chains, const KnowledgeGraph& graph);

}  // namespace kgcoi
