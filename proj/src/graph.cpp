#include "kgcoi/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "kgcoi/errors.hpp"
#include "kgcoi/text.hpp"

namespace kgcoi {

Vocabulary Vocabulary::pubtator() {
  return Vocabulary{
      {"associate", "bind", "cause", "compare", "cotreat", "drug_interact", "inhibit", "interact",
       "negative_correlate", "positive_correlate", "prevent", "stimulate", "treat"},
      {"CELLLINE", "CHEMICAL", "CHROMOSOME", "DISEASE", "DNAMUTATION", "GENE", "MUTATION",
       "PROTEINMUTATION", "SNP", "SPECIES", "VARIANT"}};
}

bool canonical_less(const Triple& a, const Triple& b) {
  if (a.n_pubs != b.n_pubs) return a.n_pubs > b.n_pubs;
  if (a.head != b.head) return a.head < b.head;
  if (a.relation != b.relation) return a.relation < b.relation;
  return a.tail < b.tail;
}

MaskSpec MaskSpec::edge(EntityId head, RelationType relation, EntityId tail) {
  return MaskSpec{MaskMode::edge, std::move(head), std::move(tail), std::move(relation)};
}

MaskSpec MaskSpec::pair(EntityId head, EntityId tail) {
  return MaskSpec{MaskMode::pair, std::move(head), std::move(tail), std::nullopt};
}

void MaskSpec::validate() const {
  if (mode == MaskMode::edge && !relation)
    throw InvalidArgument("edge mask requires a relation");
  if (mode == MaskMode::pair && relation)
    throw InvalidArgument("pair mask must not name a relation");
}

// ---------------------------------------------------------------------------
// KnowledgeGraph

std::optional<std::uint32_t> KnowledgeGraph::find(const EntityId& id) const {
  auto it = index_.find(id.value);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t KnowledgeGraph::index_of(const EntityId& id) const {
  auto idx = find(id);
  if (!idx) throw NotFoundError("unknown entity '" + id.value + "'");
  return *idx;
}

std::optional<std::uint32_t> KnowledgeGraph::find_triple(const EntityId& head,
                                                         const RelationType& relation,
                                                         const EntityId& tail) const {
  auto key = [](const Triple& t) { return std::tie(t.head, t.relation, t.tail); };
  Triple probe{head, relation, tail, 0};
  auto it = std::lower_bound(triples_.begin(), triples_.end(), probe,
                             [&](const Triple& a, const Triple& b) { return key(a) < key(b); });
  if (it == triples_.end() || key(*it) != key(probe)) return std::nullopt;
  return static_cast<std::uint32_t>(it - triples_.begin());
}

std::string KnowledgeGraph::canonical_form() const {
  std::ostringstream out;
  for (const Entity& e : entities_) {
    out << "E\t" << e.id.value << '\t' << e.name << '\t' << e.etype;
    for (const auto& a : e.aliases) out << '\t' << a;
    out << '\n';
  }
  for (const Triple& t : triples_) {
    out << "T\t" << t.head.value << '\t' << t.relation.label << '\t' << t.tail.value << '\t'
        << t.n_pubs << '\n';
  }
  return out.str();
}

GraphView KnowledgeGraph::view() const { return GraphView(*this); }

// ---------------------------------------------------------------------------
// GraphView

GraphView::GraphView(const KnowledgeGraph& graph)
    : graph_(&graph), hidden_(std::make_shared<const std::vector<std::uint32_t>>()) {}

bool GraphView::hidden(std::uint32_t triple) const {
  return !hidden_->empty() && std::binary_search(hidden_->begin(), hidden_->end(), triple);
}

std::span<const std::uint32_t> GraphView::hidden_triples() const { return *hidden_; }

std::vector<Triple> GraphView::neighbors(const EntityId& e) const {
  std::uint32_t idx = graph_->index_of(e);
  std::vector<Triple> out;
  for_each_incident(idx, [&](std::uint32_t t) { out.push_back(graph_->triples()[t]); });
  return out;
}

std::vector<std::uint32_t> GraphView::direct_relation_indices(std::uint32_t a,
                                                              std::uint32_t b) const {
  if (a == b) throw InvalidArgument("direct relations need two distinct entities");
  // Scan the shorter incidence list.
  std::uint32_t probe = graph_->incident(a).size() <= graph_->incident(b).size() ? a : b;
  std::uint32_t other = probe == a ? b : a;
  std::vector<std::uint32_t> out;
  for_each_incident(probe, [&](std::uint32_t t) {
    if (graph_->head_index(t) == other || graph_->tail_index(t) == other) out.push_back(t);
  });
  return out;
}

std::vector<Triple> GraphView::direct_relations(const EntityId& a, const EntityId& b) const {
  std::uint32_t ia = graph_->index_of(a);
  std::uint32_t ib = graph_->index_of(b);
  std::vector<Triple> out;
  for (std::uint32_t t : direct_relation_indices(ia, ib)) out.push_back(graph_->triples()[t]);
  return out;
}

GraphView GraphView::mask(const MaskSpec& spec) const {
  spec.validate();
  std::uint32_t h = graph_->index_of(spec.head);
  std::uint32_t t = graph_->index_of(spec.tail);
  if (h == t) throw InvalidArgument("mask endpoints must differ");

  std::vector<std::uint32_t> extra;
  if (spec.mode == MaskMode::edge) {
    for (const auto& [from, to] : {std::pair{spec.head, spec.tail}, std::pair{spec.tail, spec.head}}) {
      if (auto idx = graph_->find_triple(from, *spec.relation, to)) extra.push_back(*idx);
    }
    if (extra.empty()) {
      throw NotFoundError("no triple (" + spec.head.value + ", " + spec.relation->label + ", " +
                          spec.tail.value + ") to mask");
    }
  } else {
    for (std::uint32_t idx : graph_->incident(h)) {
      if (graph_->head_index(idx) == t || graph_->tail_index(idx) == t) extra.push_back(idx);
    }
  }

  auto merged = std::make_shared<std::vector<std::uint32_t>>(*hidden_);
  merged->insert(merged->end(), extra.begin(), extra.end());
  std::sort(merged->begin(), merged->end());
  merged->erase(std::unique(merged->begin(), merged->end()), merged->end());
  return GraphView(graph_, std::move(merged));
}

// ---------------------------------------------------------------------------
// Loading

GraphBuilder::GraphBuilder(Vocabulary vocabulary) : vocabulary_(std::move(vocabulary)) {}

void GraphBuilder::add_entity(const EntityId& id, std::string_view name, std::string_view etype) {
  if (id.empty()) throw IntegrityError("empty entity id");
  if (name.empty()) throw IntegrityError("entity '" + id.value + "' has an empty name");
  if (!vocabulary_.entity_types.contains(std::string(etype)))
    throw IntegrityError("entity '" + id.value + "' has unknown type '" + std::string(etype) + "'");
  auto [it, inserted] = entities_.try_emplace(id.value);
  if (inserted) {
    it->second.id = id;
    it->second.name = std::string(name);
    it->second.etype = std::string(etype);
    return;
  }
  if (it->second.name != name || it->second.etype != etype) {
    throw IntegrityError("entity '" + id.value + "' declared with conflicting name or type");
  }
}

void GraphBuilder::add_triple(const EntityId& head, const RelationType& relation,
                              const EntityId& tail, std::uint64_t n_pubs) {
  if (head == tail) throw IntegrityError("self-loop on '" + head.value + "'");
  if (!vocabulary_.relations.contains(relation.label))
    throw IntegrityError("unknown relation '" + relation.label + "'");
  if (!entities_.contains(head.value) || !entities_.contains(tail.value))
    throw IntegrityError("triple endpoint not declared");
  TripleKey key{head.value, relation.label, tail.value};
  auto [it, inserted] = triples_.try_emplace(key, n_pubs);
  if (!inserted && it->second != n_pubs) {
    throw IntegrityError("duplicate triple (" + head.value + ", " + relation.label + ", " +
                         tail.value + ") with conflicting n_pubs " + std::to_string(it->second) +
                         " vs " + std::to_string(n_pubs));
  }
}

void GraphBuilder::add_alias(const EntityId& id, std::string_view alias) {
  auto it = entities_.find(id.value);
  if (it == entities_.end()) throw NotFoundError("alias for unknown entity '" + id.value + "'");
  alias = text::trim(alias);
  if (alias.empty()) return;
  auto& aliases = it->second.aliases;
  bool seen = std::any_of(aliases.begin(), aliases.end(),
                          [&](const std::string& a) { return text::iequals(a, alias); });
  if (!seen) aliases.emplace_back(alias);
}

KnowledgeGraph GraphBuilder::build() && {
  KnowledgeGraph g;
  g.entities_.reserve(entities_.size());
  for (auto& [id, entity] : entities_) {
    // Alias order must not depend on file order.
    std::sort(entity.aliases.begin(), entity.aliases.end(),
              [](const std::string& a, const std::string& b) {
                auto la = text::to_lower(a), lb = text::to_lower(b);
                return la != lb ? la < lb : a < b;
              });
    g.index_.emplace(id, static_cast<std::uint32_t>(g.entities_.size()));
    g.entities_.push_back(std::move(entity));
  }

  g.triples_.reserve(triples_.size());
  g.endpoints_.reserve(triples_.size());
  g.adjacency_.resize(g.entities_.size());
  for (const auto& [key, n] : triples_) {
    g.triples_.push_back(Triple{EntityId(key.head), RelationType(key.relation), EntityId(key.tail), n});
    g.endpoints_.emplace_back(g.index_.at(key.head), g.index_.at(key.tail));
  }

  std::vector<std::uint32_t> order(g.triples_.size());
  std::iota(order.begin(), order.end(), 0U);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return canonical_less(g.triples_[a], g.triples_[b]);
  });
  for (std::uint32_t t : order) {
    g.adjacency_[g.endpoints_[t].first].push_back(t);
    g.adjacency_[g.endpoints_[t].second].push_back(t);
  }
  return g;
}

namespace {

std::uint64_t parse_count(std::string_view field, std::size_t line) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line) + ": n_pubs '" + std::string(field) +
                     "' is not a non-negative integer");
  }
  return value;
}

template <typename Fn>
void for_each_data_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    fn(std::string_view(line), number);
  }
}

template <typename Fn>
void with_line_context(std::size_t line, Fn&& fn) {
  try {
    fn();
  } catch (const IntegrityError& e) {
    throw IntegrityError("line " + std::to_string(line) + ": " + e.what());
  } catch (const NotFoundError& e) {
    throw NotFoundError("line " + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace

void parse_aliases(std::istream& in, GraphBuilder& builder) {
  for_each_data_line(in, [&](std::string_view line, std::size_t number) {
    auto fields = text::split(line, '\t');
    if (fields.size() != 2) {
      throw ParseError("line " + std::to_string(number) + ": expected 2 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    with_line_context(number, [&] { builder.add_alias(EntityId(std::string(fields[0])), fields[1]); });
  });
}

KnowledgeGraph parse_kg(std::istream& in, const LoadOptions& options) {
  GraphBuilder builder(options.vocabulary);
  for_each_data_line(in, [&](std::string_view line, std::size_t number) {
    auto f = text::split(line, '\t');
    if (f.size() != 8) {
      throw ParseError("line " + std::to_string(number) + ": expected 8 tab-separated fields, got " +
                       std::to_string(f.size()));
    }
    std::uint64_t n_pubs = parse_count(f[7], number);
    with_line_context(number, [&] {
      EntityId head{std::string(f[0])};
      EntityId tail{std::string(f[4])};
      builder.add_entity(head, f[1], f[2]);
      builder.add_entity(tail, f[5], f[6]);
      builder.add_triple(head, RelationType(std::string(f[3])), tail, n_pubs);
    });
  });
  if (options.aliases) {
    std::ifstream aliases(*options.aliases);
    if (!aliases) throw IoError("cannot open aliases file " + options.aliases->string());
    parse_aliases(aliases, builder);
  }
  return std::move(builder).build();
}

KnowledgeGraph load_kg(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open knowledge graph " + path.string());
  return parse_kg(in, options);
}

}  // namespace kgcoi
