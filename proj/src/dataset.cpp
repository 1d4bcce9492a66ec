#include "kgcoi/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "kgcoi/errors.hpp"
#include "kgcoi/text.hpp"

namespace kgcoi {

std::string question_text(std::string_view head_name, std::string_view tail_name) {
  return "Can we hypothesize a key relation between " + std::string(head_name) + " and " +
         std::string(tail_name) + "?";
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::below needs a positive bound");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

void BuilderConfig::validate() const {
  if (per_class < 1) throw InvalidArgument("per-class target must be at least 1");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw InvalidArgument("threshold must lie in (0, 1]");
  if (max_walk < 1) throw InvalidArgument("max walk length must be at least 1");
}

bool DatasetInstance::operator==(const DatasetInstance& o) const {
  return id == o.id && head == o.head && tail == o.tail && head_name == o.head_name &&
         tail_name == o.tail_name && label == o.label && question == o.question &&
         mask.mode == o.mask.mode && mask.head == o.mask.head && mask.tail == o.mask.tail &&
         mask.relation == o.mask.relation && provenance == o.provenance;
}

std::pair<std::string, std::string> pair_key(const EntityId& a, const EntityId& b) {
  return a.value < b.value ? std::pair{a.value, b.value} : std::pair{b.value, a.value};
}

std::uint64_t polar_pubs(const KnowledgeGraph& g, const EntityId& a, const EntityId& b,
                         Label label) {
  std::uint64_t sum = 0;
  for (const Triple& t : g.view().direct_relations(a, b)) {
    if (polarity(t.relation) == label) sum += t.n_pubs;
  }
  return sum;
}

namespace {

Label opposite(Label l) { return l == Label::stimulate ? Label::inhibit : Label::stimulate; }

bool has_polar_triple(const KnowledgeGraph& g) {
  return std::any_of(g.triples().begin(), g.triples().end(),
                     [](const Triple& t) { return polarity(t.relation).has_value(); });
}

}  // namespace

DatasetInstance sample_positive(const KnowledgeGraph& g, Rng& rng, const BuilderConfig& cfg,
                                const PairSet& used, std::span<const Label> wanted) {
  cfg.validate();
  if (g.entity_count() == 0 || !has_polar_triple(g))
    throw SamplingExhausted("graph has no stimulate or inhibit triples");

  auto is_wanted = [&](Label l) {
    return wanted.empty() || std::find(wanted.begin(), wanted.end(), l) != wanted.end();
  };

  for (std::size_t restart = 0; restart < cfg.restart_budget; ++restart) {
    std::uint32_t cur = static_cast<std::uint32_t>(rng.below(g.entity_count()));
    std::vector<std::uint32_t> trace{cur};
    for (std::size_t step = 0; step <= cfg.max_walk; ++step) {
      for (std::uint32_t ti : g.incident(cur)) {
        const Triple& t = g.triples()[ti];
        auto label = polarity(t.relation);
        if (!label || !is_wanted(*label)) continue;
        if (used.contains(pair_key(t.head, t.tail))) continue;
        const double limit = cfg.threshold * static_cast<double>(t.n_pubs);
        if (!(static_cast<double>(polar_pubs(g, t.head, t.tail, opposite(*label))) < limit))
          continue;

        DatasetInstance inst;
        inst.head = t.head;
        inst.tail = t.tail;
        inst.head_name = g.entity(t.head).name;
        inst.tail_name = g.entity(t.tail).name;
        inst.label = *label;
        inst.question = question_text(inst.head_name, inst.tail_name);
        inst.mask = MaskSpec::edge(t.head, t.relation, t.tail);
        std::uint32_t other = g.head_index(ti) == cur ? g.tail_index(ti) : g.head_index(ti);
        trace.push_back(other);
        for (std::uint32_t e : trace) inst.provenance.push_back(g.entity_at(e).id);
        return inst;
      }
      if (step == cfg.max_walk) break;
      // Descend along the most-cited triple that leads somewhere new.
      std::optional<std::uint32_t> next;
      for (std::uint32_t ti : g.incident(cur)) {
        std::uint32_t other = g.head_index(ti) == cur ? g.tail_index(ti) : g.head_index(ti);
        if (std::find(trace.begin(), trace.end(), other) == trace.end()) {
          next = other;
          break;
        }
      }
      if (!next) break;
      cur = *next;
      trace.push_back(cur);
    }
  }
  throw SamplingExhausted("no valid stimulate/inhibit instance after " +
                          std::to_string(cfg.restart_budget) + " restarts");
}

DatasetInstance sample_no_relation(const KnowledgeGraph& g, std::span<const EntityId> pool,
                                   Rng& rng, const BuilderConfig& cfg, const PairSet& used) {
  if (pool.size() < 2) throw SamplingExhausted("no_relation pool needs at least two entities");
  const GraphView view = g.view();
  for (std::size_t attempt = 0; attempt < cfg.restart_budget; ++attempt) {
    std::size_t a = rng.below(pool.size());
    std::size_t b = rng.below(pool.size() - 1);
    if (b >= a) ++b;
    const EntityId& head = pool[a];
    const EntityId& tail = pool[b];
    if (used.contains(pair_key(head, tail))) continue;
    if (!view.direct_relation_indices(g.index_of(head), g.index_of(tail)).empty()) continue;

    DatasetInstance inst;
    inst.head = head;
    inst.tail = tail;
    inst.head_name = g.entity(head).name;
    inst.tail_name = g.entity(tail).name;
    inst.label = Label::no_relation;
    inst.question = question_text(inst.head_name, inst.tail_name);
    inst.mask = MaskSpec::pair(head, tail);
    inst.provenance = {head, tail};
    return inst;
  }
  throw SamplingExhausted("no unconnected pair found after " +
                          std::to_string(cfg.restart_budget) + " draws");
}

std::vector<DatasetInstance> build_dataset(const KnowledgeGraph& g, const BuilderConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  PairSet used;
  std::vector<DatasetInstance> out;
  std::size_t n_stim = 0;
  std::size_t n_inh = 0;
  while (n_stim < cfg.per_class || n_inh < cfg.per_class) {
    std::vector<Label> wanted;
    if (n_inh < cfg.per_class) wanted.push_back(Label::inhibit);
    if (n_stim < cfg.per_class) wanted.push_back(Label::stimulate);
    DatasetInstance inst = sample_positive(g, rng, cfg, used, wanted);
    used.insert(pair_key(inst.head, inst.tail));
    (inst.label == Label::stimulate ? n_stim : n_inh) += 1;
    out.push_back(std::move(inst));
  }

  std::vector<EntityId> pool;
  for (const DatasetInstance& inst : out) {
    pool.push_back(inst.head);
    pool.push_back(inst.tail);
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  for (std::size_t i = 0; i < cfg.per_class; ++i) {
    DatasetInstance inst = sample_no_relation(g, pool, rng, cfg, used);
    used.insert(pair_key(inst.head, inst.tail));
    out.push_back(std::move(inst));
  }

  rng.shuffle(out);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(out.size()).size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::string n = std::to_string(i + 1);
    out[i].id = "q" + std::string(width - n.size(), '0') + n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON lines

void write_dataset(std::ostream& out, std::span<const DatasetInstance> instances) {
  for (const DatasetInstance& inst : instances) {
    nlohmann::json prov = nlohmann::json::array();
    for (const EntityId& e : inst.provenance) prov.push_back(e.value);
    nlohmann::json mask{{"mode", inst.mask.mode == MaskMode::edge ? "edge" : "pair"}};
    mask["relation"] = inst.mask.relation ? nlohmann::json(inst.mask.relation->label) : nlohmann::json();
    nlohmann::json j{{"id", inst.id},
                     {"head_id", inst.head.value},
                     {"tail_id", inst.tail.value},
                     {"head_name", inst.head_name},
                     {"tail_name", inst.tail_name},
                     {"label", to_string(inst.label)},
                     {"question", inst.question},
                     {"mask", mask},
                     {"provenance", prov}};
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, std::span<const DatasetInstance> instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_dataset(out, instances);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<DatasetInstance> parse_dataset(std::istream& in) {
  std::vector<DatasetInstance> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    const std::string where = "dataset line " + std::to_string(number) + ": ";
    try {
      auto j = nlohmann::json::parse(line);
      DatasetInstance inst;
      inst.id = j.at("id").get<std::string>();
      inst.head = EntityId(j.at("head_id").get<std::string>());
      inst.tail = EntityId(j.at("tail_id").get<std::string>());
      inst.head_name = j.at("head_name").get<std::string>();
      inst.tail_name = j.at("tail_name").get<std::string>();
      auto label = label_from_string(j.at("label").get<std::string>());
      if (!label) throw ParseError(where + "unknown label");
      inst.label = *label;
      inst.question = j.at("question").get<std::string>();
      const auto& mask = j.at("mask");
      const std::string mode = mask.at("mode").get<std::string>();
      if (mode == "edge") {
        inst.mask = MaskSpec::edge(inst.head, RelationType(mask.at("relation").get<std::string>()),
                                   inst.tail);
      } else if (mode == "pair") {
        inst.mask = MaskSpec::pair(inst.head, inst.tail);
      } else {
        throw ParseError(where + "unknown mask mode '" + mode + "'");
      }
      for (const auto& e : j.value("provenance", nlohmann::json::array()))
        inst.provenance.emplace_back(e.get<std::string>());
      if (inst.id.empty()) throw ParseError(where + "empty id");
      out.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return out;
}

std::vector<DatasetInstance> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return parse_dataset(in);
}

}  // namespace kgcoi
