#include "kgcoi/chains.hpp"

#include <algorithm>
#include <deque>
#include <exception>

#include "kgcoi/errors.hpp"

namespace kgcoi {

Triple RelationChain::hop_triple(std::size_t i) const {
  const Hop& hop = hops.at(i);
  const EntityId& from = entities.at(i);
  const EntityId& to = entities.at(i + 1);
  return hop.forward ? Triple{from, hop.relation, to, 0} : Triple{to, hop.relation, from, 0};
}

bool chain_rank_less(const RelationChain& a, const RelationChain& b) {
  if (a.length() != b.length()) return a.length() < b.length();
  if (a.total_pubs != b.total_pubs) return a.total_pubs > b.total_pubs;
  if (a.entities != b.entities) return a.entities < b.entities;
  return a.hops < b.hops;
}

namespace {

constexpr std::uint32_t kFar = std::numeric_limits<std::uint32_t>::max();

// Hop distance from `target` to every entity within `radius`, ignoring hidden
// triples. Used as an admissible bound when extending partial paths.
std::vector<std::uint32_t> distances_from(const GraphView& view, std::uint32_t target,
                                          std::size_t radius) {
  const KnowledgeGraph& g = view.graph();
  std::vector<std::uint32_t> dist(g.entity_count(), kFar);
  std::deque<std::uint32_t> queue{target};
  dist[target] = 0;
  while (!queue.empty()) {
    std::uint32_t u = queue.front();
    queue.pop_front();
    if (dist[u] >= radius) continue;
    view.for_each_incident(u, [&](std::uint32_t t) {
      std::uint32_t v = g.head_index(t) == u ? g.tail_index(t) : g.head_index(t);
      if (dist[v] == kFar) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    });
  }
  return dist;
}

struct PartialPath {
  std::vector<std::uint32_t> nodes;
  std::vector<std::uint32_t> triples;
};

RelationChain materialize(const KnowledgeGraph& g, const PartialPath& p) {
  RelationChain chain;
  chain.entities.reserve(p.nodes.size());
  for (std::uint32_t n : p.nodes) chain.entities.push_back(g.entity_at(n).id);
  for (std::size_t i = 0; i < p.triples.size(); ++i) {
    const Triple& t = g.triples()[p.triples[i]];
    chain.hops.push_back(Hop{t.relation, g.head_index(p.triples[i]) == p.nodes[i]});
    chain.total_pubs += t.n_pubs;
  }
  return chain;
}

}  // namespace

std::vector<RelationChain> find_chains(const GraphView& view, const ChainQuery& q) {
  const KnowledgeGraph& g = view.graph();
  std::uint32_t head = g.index_of(q.head);
  std::uint32_t tail = g.index_of(q.tail);
  if (head == tail) throw InvalidArgument("chain query endpoints must differ");
  if (q.k == 0) throw InvalidArgument("chain length bound k must be at least 1");
  if (q.limit == 0) throw InvalidArgument("chain limit must be at least 1");

  const std::vector<std::uint32_t> dist = distances_from(view, tail, q.k);
  std::vector<RelationChain> found;
  if (dist[head] == kFar) return found;

  std::vector<PartialPath> frontier{PartialPath{{head}, {}}};
  for (std::size_t depth = 0; depth < q.k && !frontier.empty(); ++depth) {
    const std::size_t remaining = q.k - depth - 1;  // hops left after this one
    std::vector<PartialPath> next;
    for (const PartialPath& path : frontier) {
      std::uint32_t u = path.nodes.back();
      view.for_each_incident(u, [&](std::uint32_t t) {
        std::uint32_t v = g.head_index(t) == u ? g.tail_index(t) : g.head_index(t);
        if (std::find(path.nodes.begin(), path.nodes.end(), v) != path.nodes.end()) return;
        if (v == tail) {
          PartialPath done = path;
          done.nodes.push_back(v);
          done.triples.push_back(t);
          found.push_back(materialize(g, done));
          return;
        }
        if (remaining == 0 || dist[v] == kFar || dist[v] > remaining) return;
        PartialPath longer = path;
        longer.nodes.push_back(v);
        longer.triples.push_back(t);
        next.push_back(std::move(longer));
      });
    }
    frontier = std::move(next);
  }

  std::sort(found.begin(), found.end(), chain_rank_less);
  if (found.size() > q.limit) found.resize(q.limit);
  return found;
}

std::vector<std::vector<RelationChain>> find_chains_batch_serial(
    const GraphView& view, std::span<const ChainQuery> queries) {
  std::vector<std::vector<RelationChain>> out;
  out.reserve(queries.size());
  for (const ChainQuery& q : queries) out.push_back(find_chains(view, q));
  return out;
}

std::vector<std::vector<RelationChain>> find_chains_batch(const GraphView& view,
                                                          std::span<const ChainQuery> queries) {
  std::vector<std::vector<RelationChain>> out(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  // Exceptions may not cross the parallel region; the first one is rethrown.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = find_chains(view, queries[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(kgcoi_chain_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::string render_chains(std::span<const RelationChain> chains, const KnowledgeGraph& graph) {
  auto name_of = [&](const EntityId& id) -> const std::string& {
    auto idx = graph.find(id);
    if (!idx) throw IntegrityError("chain references unknown entity '" + id.value + "'");
    return graph.entity_at(*idx).name;
  };
  std::string out;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const RelationChain& chain = chains[c];
    if (chain.entities.size() != chain.hops.size() + 1)
      throw IntegrityError("malformed chain: entity and hop counts disagree");
    if (c > 0) out += '\n';
    for (std::size_t i = 0; i < chain.hops.size(); ++i) {
      if (i > 0) out += ", ";
      out += '(';
      out += name_of(chain.entities[i]);
      out += ", ";
      out += chain.hops[i].relation.label;
      out += ", ";
      out += name_of(chain.entities[i + 1]);
      out += ')';
    }
  }
  return out;
}

}  // namespace kgcoi
