#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kgcoi::testing {

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(KGCOI_FIXTURE_DIR) / name;
}

std::filesystem::path golden(const std::string& name) {
  return std::filesystem::path(KGCOI_GOLDEN_DIR) / name;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KnowledgeGraph graph_from_rows(const std::string& tsv) {
  std::istringstream in(tsv);
  return parse_kg(in);
}

KnowledgeGraph toy_graph() { return load_kg(fixture("toy_kg.tsv")); }

KnowledgeGraph case_graph() {
  LoadOptions opts;
  opts.aliases = fixture("case_aliases.tsv");
  return load_kg(fixture("case_kg.tsv"), opts);
}

namespace {

const char* kRelations[] = {"associate", "cause", "stimulate", "inhibit",
                            "positive_correlate", "negative_correlate", "treat", "bind"};

std::uint64_t draw(std::mt19937_64& e, std::uint64_t n) { return e() % n; }

}  // namespace

KnowledgeGraph random_graph(std::uint64_t seed, std::size_t n, std::size_t m) {
  std::mt19937_64 e(seed);
  GraphBuilder b;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = "E" + std::to_string(i);
    b.add_entity(EntityId(id), "Entity " + std::to_string(i), "GENE");
  }
  std::set<std::tuple<std::size_t, std::string, std::size_t>> seen;
  for (std::size_t j = 0; j < m && n >= 2; ++j) {
    std::size_t h = draw(e, n);
    std::size_t t = draw(e, n - 1);
    if (t >= h) ++t;
    std::string rel = kRelations[draw(e, 8)];
    if (!seen.insert({h, rel, t}).second) continue;
    b.add_triple(EntityId("E" + std::to_string(h)), RelationType(rel),
                 EntityId("E" + std::to_string(t)), 1 + draw(e, 50));
  }
  return std::move(b).build();
}

KnowledgeGraph synthetic_graph(std::uint64_t seed, std::size_t nodes) {
  std::mt19937_64 e(seed);
  GraphBuilder b;
  const char* types[] = {"GENE", "CHEMICAL", "DISEASE"};
  for (std::size_t i = 0; i < nodes; ++i) {
    b.add_entity(EntityId("N" + std::to_string(i)), "Node " + std::to_string(i), types[i % 3]);
  }
  std::set<std::tuple<std::size_t, std::string, std::size_t>> seen;
  for (std::size_t h = 0; h < nodes; ++h) {
    const std::size_t degree = 2 + draw(e, 3);
    for (std::size_t d = 0; d < degree; ++d) {
      std::size_t t = draw(e, nodes - 1);
      if (t >= h) ++t;
      std::string rel = kRelations[draw(e, 8)];
      if (!seen.insert({h, rel, t}).second) continue;
      // Skewed counts so the publication ordering matters.
      std::uint64_t pubs = 1 + draw(e, 8) * draw(e, 8) * (1 + draw(e, 5));
      b.add_triple(EntityId("N" + std::to_string(h)), RelationType(rel),
                   EntityId("N" + std::to_string(t)), pubs);
    }
  }
  return std::move(b).build();
}

std::string chain_key(const RelationChain& c) {
  std::string key = c.entities.front().value;
  for (std::size_t i = 0; i < c.hops.size(); ++i) {
    const char dir = c.hops[i].forward ? '>' : '<';
    key += dir + c.hops[i].relation.label + dir + c.entities[i + 1].value;
  }
  return key;
}

std::set<std::string> brute_force_chains(const GraphView& view, const EntityId& head,
                                         const EntityId& tail, std::size_t k) {
  const KnowledgeGraph& g = view.graph();
  std::set<std::string> out;
  std::vector<std::string> path{head.value};
  std::function<void(const std::string&, std::string, std::size_t)> walk =
      [&](const std::string& at, std::string key, std::size_t depth) {
        if (at == tail.value && depth > 0) {
          out.insert(key);
          return;
        }
        if (depth == k) return;
        for (std::uint32_t i = 0; i < g.triples().size(); ++i) {
          if (view.hidden(i)) continue;
          const Triple& t = g.triples()[i];
          std::string next;
          char dir;
          if (t.head.value == at) {
            next = t.tail.value;
            dir = '>';
          } else if (t.tail.value == at) {
            next = t.head.value;
            dir = '<';
          } else {
            continue;
          }
          if (std::find(path.begin(), path.end(), next) != path.end()) continue;
          path.push_back(next);
          walk(next, key + dir + t.relation.label + dir + next, depth + 1);
          path.pop_back();
        }
      };
  walk(head.value, head.value, 0);
  return out;
}

namespace {

std::vector<std::string> simple_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

std::vector<RefHit> reference_bm25(const std::vector<Document>& docs, const std::string& query,
                                   std::size_t top_k) {
  const double k1 = 1.2;
  const double b = 0.75;
  std::vector<std::vector<std::string>> toks;
  double total = 0;
  for (const Document& d : docs) {
    toks.push_back(simple_tokens(d.title + " " + d.text));
    total += static_cast<double>(toks.back().size());
  }
  const double n = static_cast<double>(docs.size());
  const double avg = docs.empty() ? 0.0 : total / n;
  std::vector<RefHit> hits;
  const auto q = simple_tokens(query);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0.0;
    bool any = false;
    for (const std::string& term : q) {
      double df = 0;
      for (const auto& t : toks) df += std::count(t.begin(), t.end(), term) > 0 ? 1 : 0;
      double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), term));
      if (tf == 0) continue;
      any = true;
      double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      double len = static_cast<double>(toks[i].size());
      score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
    }
    if (any && score > 0) hits.push_back({docs[i].doc_id, score});
  }
  std::sort(hits.begin(), hits.end(), [](const RefHit& a, const RefHit& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
  if (hits.size() > top_k) hits.resize(top_k);
  return hits;
}

std::vector<Mention> brute_force_link(const std::string& text, const Lexicon& lex) {
  // Token spans by hand.
  struct Tok {
    std::string norm;
    std::size_t start, end;
  };
  std::vector<Tok> toks;
  for (std::size_t i = 0; i < text.size();) {
    if (std::isalnum(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i;
      std::string norm;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) {
        norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
        ++j;
      }
      toks.push_back({norm, i, j});
      i = j;
    } else {
      ++i;
    }
  }
  std::vector<Mention> out;
  std::size_t i = 0;
  while (i < toks.size()) {
    std::size_t best_len = 0;
    const EntityId* best = nullptr;
    for (const auto& [surface, id] : lex.entries()) {
      std::vector<std::string> parts;
      std::istringstream ss(surface);
      for (std::string p; ss >> p;) parts.push_back(p);
      if (parts.empty() || i + parts.size() > toks.size()) continue;
      bool match = true;
      for (std::size_t p = 0; p < parts.size() && match; ++p) match = toks[i + p].norm == parts[p];
      if (match && parts.size() > best_len) {
        best_len = parts.size();
        best = &id;
      }
    }
    if (best != nullptr) {
      const std::size_t s = toks[i].start;
      const std::size_t e = toks[i + best_len - 1].end;
      out.push_back({*best, text.substr(s, e - s), s, e});
      i += best_len;
    } else {
      ++i;
    }
  }
  return out;
}

RefMetrics reference_metrics(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  RefMetrics m{0.0, 0.0};
  if (gold.empty()) return m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i] ? 1 : 0;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  double sum = 0.0;
  for (Label c : kAllLabels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    if (tp == 0) continue;
    double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    sum += 2.0 * p * r / (p + r);
  }
  m.macro_f1 = sum / 3.0;
  return m;
}

std::vector<std::string> validate_dataset(const KnowledgeGraph& g,
                                          const std::vector<DatasetInstance>& ds,
                                          const BuilderConfig& cfg) {
  std::vector<std::string> bad;
  std::map<Label, std::size_t> counts;
  std::set<std::pair<std::string, std::string>> pairs;
  std::set<std::string> ids;
  auto polar = [](const std::string& rel) -> std::optional<Label> {
    if (rel == "stimulate" || rel == "positive_correlate") return Label::stimulate;
    if (rel == "inhibit" || rel == "negative_correlate") return Label::inhibit;
    return std::nullopt;
  };
  for (const DatasetInstance& d : ds) {
    const std::string tag = d.id + ": ";
    ++counts[d.label];
    if (!ids.insert(d.id).second) bad.push_back(tag + "duplicate id");
    auto key = d.head.value < d.tail.value ? std::pair{d.head.value, d.tail.value}
                                           : std::pair{d.tail.value, d.head.value};
    if (!pairs.insert(key).second) bad.push_back(tag + "pair reused");
    const std::string hn = g.entity(d.head).name;
    const std::string tn = g.entity(d.tail).name;
    if (d.question != "Can we hypothesize a key relation between " + hn + " and " + tn + "?")
      bad.push_back(tag + "question text");
    // Every triple between the pair, scanned from the raw triple list.
    std::vector<Triple> direct;
    for (const Triple& t : g.triples()) {
      if ((t.head == d.head && t.tail == d.tail) || (t.head == d.tail && t.tail == d.head))
        direct.push_back(t);
    }
    if (d.label == Label::no_relation) {
      if (!direct.empty()) bad.push_back(tag + "no_relation pair has a direct triple");
      if (d.mask.mode != MaskMode::pair) bad.push_back(tag + "no_relation mask mode");
      continue;
    }
    if (d.mask.mode != MaskMode::edge || !d.mask.relation) {
      bad.push_back(tag + "positive mask must name an edge");
      continue;
    }
    const Triple* gold = nullptr;
    for (const Triple& t : direct) {
      if (t.head == d.mask.head && t.tail == d.mask.tail && t.relation == *d.mask.relation)
        gold = &t;
    }
    if (gold == nullptr) {
      bad.push_back(tag + "masked triple missing from graph");
      continue;
    }
    if (polar(gold->relation.label) != d.label) bad.push_back(tag + "label disagrees with triple");
    std::uint64_t opposite = 0;
    for (const Triple& t : direct) {
      auto p = polar(t.relation.label);
      if (p && *p != d.label) opposite += t.n_pubs;
    }
    if (!(static_cast<double>(opposite) < cfg.threshold * static_cast<double>(gold->n_pubs)))
      bad.push_back(tag + "opposite relation too strong");
    // The walk must be connected in g.
    for (std::size_t i = 0; i + 1 < d.provenance.size(); ++i) {
      bool linked = false;
      for (const Triple& t : g.triples()) {
        if ((t.head == d.provenance[i] && t.tail == d.provenance[i + 1]) ||
            (t.tail == d.provenance[i] && t.head == d.provenance[i + 1])) {
          linked = true;
          break;
        }
      }
      if (!linked) bad.push_back(tag + "walk trace is not connected");
    }
  }
  for (Label l : kAllLabels) {
    if (counts[l] != cfg.per_class)
      bad.push_back("class " + std::string(to_string(l)) + " has " + std::to_string(counts[l]));
  }
  return bad;
}

}  // namespace kgcoi::testing
