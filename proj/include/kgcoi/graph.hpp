#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgcoi/types.hpp"

namespace kgcoi {

/// Closed label sets accepted by the loader.
struct Vocabulary {
  std::set<std::string> relations;
  std::set<std::string> entity_types;

  /// PubTator3 relation and entity-type labels.
  static Vocabulary pubtator();
};

struct Entity {
  EntityId id;
  std::string name;
  std::string etype;
  std::vector<std::string> aliases;
};

struct Triple {
  EntityId head;
  RelationType relation;
  EntityId tail;
  std::uint64_t n_pubs = 0;

  bool operator==(const Triple&) const = default;
};

/// Canonical triple order: n_pubs descending, then head, relation, tail.
bool canonical_less(const Triple& a, const Triple& b);

enum class MaskMode { edge, pair };

struct MaskSpec {
  MaskMode mode = MaskMode::pair;
  EntityId head;
  EntityId tail;
  std::optional<RelationType> relation;

  static MaskSpec edge(EntityId head, RelationType relation, EntityId tail);
  static MaskSpec pair(EntityId head, EntityId tail);

  /// Throws InvalidArgument when mode and relation disagree.
  void validate() const;
};

class GraphView;

/// Immutable typed knowledge graph. Entities are kept sorted by id and
/// triples in (head, relation, tail) order so that row order in the source
/// file never leaks into the result.
class KnowledgeGraph {
public:
  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t triple_count() const noexcept { return triples_.size(); }

  const std::vector<Entity>& entities() const noexcept { return entities_; }
  const std::vector<Triple>& triples() const noexcept { return triples_; }

  std::optional<std::uint32_t> find(const EntityId& id) const;
  /// Throws NotFoundError.
  std::uint32_t index_of(const EntityId& id) const;
  const Entity& entity(const EntityId& id) const { return entities_[index_of(id)]; }
  const Entity& entity_at(std::uint32_t index) const { return entities_[index]; }

  std::uint32_t head_index(std::uint32_t triple) const { return endpoints_[triple].first; }
  std::uint32_t tail_index(std::uint32_t triple) const { return endpoints_[triple].second; }

  /// Triple indices incident to an entity, in canonical neighbor order.
  std::span<const std::uint32_t> incident(std::uint32_t entity_index) const {
    return adjacency_[entity_index];
  }

  /// Index of the exact (head, relation, tail) triple, if present.
  std::optional<std::uint32_t> find_triple(const EntityId& head, const RelationType& relation,
                                           const EntityId& tail) const;

  /// Deterministic text serialization; equal graphs give equal strings.
  std::string canonical_form() const;

  GraphView view() const;

private:
  friend class GraphBuilder;

  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<Triple> triples_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> endpoints_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
};

/// Read-only window onto a graph with an optional set of hidden triples.
/// Views share the underlying graph, which must outlive them.
class GraphView {
public:
  GraphView(const KnowledgeGraph& graph);  // NOLINT(google-explicit-constructor)

  const KnowledgeGraph& graph() const noexcept { return *graph_; }

  bool hidden(std::uint32_t triple) const;
  std::span<const std::uint32_t> hidden_triples() const;

  /// Visible incident triple indices in canonical neighbor order.
  template <typename Fn>
  void for_each_incident(std::uint32_t entity_index, Fn&& fn) const {
    for (std::uint32_t t : graph_->incident(entity_index)) {
      if (!hidden(t)) fn(t);
    }
  }

  std::vector<Triple> neighbors(const EntityId& e) const;
  std::vector<Triple> direct_relations(const EntityId& a, const EntityId& b) const;
  std::vector<std::uint32_t> direct_relation_indices(std::uint32_t a, std::uint32_t b) const;

  /// Returns a new view hiding the triples named by spec in addition to the
  /// ones this view already hides.
  GraphView mask(const MaskSpec& spec) const;

private:
  GraphView(const KnowledgeGraph* graph, std::shared_ptr<const std::vector<std::uint32_t>> hidden)
      : graph_(graph), hidden_(std::move(hidden)) {}

  const KnowledgeGraph* graph_;
  std::shared_ptr<const std::vector<std::uint32_t>> hidden_;
};

inline std::vector<Triple> neighbors(const GraphView& g, const EntityId& e) {
  return g.neighbors(e);
}
inline std::vector<Triple> direct_relations(const GraphView& g, const EntityId& a,
                                            const EntityId& b) {
  return g.direct_relations(a, b);
}
inline GraphView mask(const GraphView& g, const MaskSpec& spec) { return g.mask(spec); }

/// Accumulates rows during load; build() freezes the result.
class GraphBuilder {
public:
  explicit GraphBuilder(Vocabulary vocabulary = Vocabulary::pubtator());

  /// Adds or re-confirms an entity. A second sighting with a different name
  /// or type is an integrity error.
  void add_entity(const EntityId& id, std::string_view name, std::string_view etype);
  void add_triple(const EntityId& head, const RelationType& relation, const EntityId& tail,
                  std::uint64_t n_pubs);
  void add_alias(const EntityId& id, std::string_view alias);

  KnowledgeGraph build() &&;

private:
  struct TripleKey {
    std::string head, relation, tail;
    auto operator<=>(const TripleKey&) const = default;
  };

  Vocabulary vocabulary_;
  std::map<std::string, Entity> entities_;
  std::map<TripleKey, std::uint64_t> triples_;
};

struct LoadOptions {
  Vocabulary vocabulary = Vocabulary::pubtator();
  std::optional<std::filesystem::path> aliases;
};

/// Parses the 8-column KG TSV format from a stream.
KnowledgeGraph parse_kg(std::istream& in, const LoadOptions& options = {});
KnowledgeGraph load_kg(const std::filesystem::path& path, const LoadOptions& options = {});

/// Reads `entity_id<TAB>alias` rows into a builder.
void parse_aliases(std::istream& in, GraphBuilder& builder);

}  // namespace kgcoi
