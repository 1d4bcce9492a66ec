#include "kgcoi/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <ostream>
#include <set>

#include "kgcoi/errors.hpp"
#include "kgcoi/parse.hpp"

namespace kgcoi {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::direct:
      return "direct";
    case Method::cot:
      return "cot";
    case Method::rag:
      return "rag";
    case Method::kgcoi:
      return "kgcoi";
  }
  return "direct";
}

Method method_from_string(std::string_view s) {
  for (Method m : {Method::direct, Method::cot, Method::rag, Method::kgcoi}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(s) +
                        "' (expected direct, cot, rag or kgcoi)");
}

Question question_from(const DatasetInstance& inst) {
  Question q;
  q.id = inst.id;
  q.head = inst.head;
  q.tail = inst.tail;
  q.text = question_text(inst.head_name, inst.tail_name);
  q.gold = inst.label;
  q.mask = inst.mask;
  return q;
}

void PipelineConfig::validate() const {
  generation.validate();
  verification.validate();
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (chain_limit < 1) throw InvalidArgument("chain limit must be at least 1");
  if (top_k < 1) throw InvalidArgument("top_k must be at least 1");
  if (parallelism < 1) throw InvalidArgument("parallelism must be at least 1");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool needs_index(const PipelineConfig& cfg) {
  if (cfg.method == Method::rag) return true;
  return cfg.method == Method::kgcoi && !cfg.ablation.no_literature;
}

void check_resources(const Resources& res, const PipelineConfig& cfg) {
  if (res.graph == nullptr) throw InvalidArgument("pipeline needs a knowledge graph");
  if (res.generator == nullptr) throw InvalidArgument("pipeline needs a generator backend");
  if (needs_index(cfg) && res.index == nullptr)
    throw InvalidArgument(std::string(to_string(cfg.method)) + " needs a literature index");
  const bool enriches = cfg.method == Method::kgcoi && !cfg.ablation.no_literature &&
                        !cfg.ablation.no_enrichment;
  if (enriches && res.enricher == nullptr)
    throw InvalidArgument("kgcoi needs an enricher backend");
  if (cfg.verify && cfg.method != Method::direct && (res.verifier == nullptr || res.linker == nullptr))
    throw InvalidArgument("verification needs a verifier backend and an entity linker");
}

RunRecord attempt(const Question& q, const GraphView& masked, const Resources& res,
                  const PipelineConfig& cfg, const GenerationConfig& gen, CallCounts& calls) {
  RunRecord r;
  r.id = q.id;
  r.method = cfg.method;
  r.temperature = gen.temperature;
  r.seed = gen.seed;

  auto retrieve = [&](const std::string& query) {
    ++calls.retrievals;
    auto hits = res.index->search(query, cfg.top_k);
    for (const SearchHit& h : hits) r.doc_ids.push_back(h.doc_id);
    return render_documents(*res.index, hits);
  };

  TemplateVariant variant = TemplateVariant::direct;
  Bindings bindings;
  switch (cfg.method) {
    case Method::direct:
      bindings["question"] = q.text;
      break;
    case Method::cot:
      variant = TemplateVariant::cot;
      bindings["question"] = q.text;
      break;
    case Method::rag:
      variant = TemplateVariant::rag;
      r.query = q.text;
      bindings["context"] = retrieve(r.query);
      bindings["question"] = q.text;
      break;
    case Method::kgcoi: {
      const Ablation& ab = cfg.ablation;
      std::optional<std::string> relations;
      if (!ab.no_kg) {
        ++calls.chain_searches;
        r.chains = find_chains(masked, ChainQuery{q.head, q.tail, cfg.k, cfg.chain_limit});
        relations = render_chains(r.chains, *res.graph);
      }
      std::optional<std::string> documents;
      if (!ab.no_literature) {
        if (ab.no_enrichment) {
          r.query = q.text;
        } else {
          ++calls.enricher;
          r.query = enrich_query(q, relations.value_or(""), *res.enricher, gen, &r.query_fallback,
                                 &r.transcripts);
        }
        documents = retrieve(r.query);
      }
      std::string context = kg_context(relations, documents);
      if (ab.no_cot) {
        bindings["question"] = q.text + "\n\nContext: " + context;
      } else {
        variant = TemplateVariant::kgcoi;
        bindings["context"] = context;
        bindings["question"] = q.text;
      }
      break;
    }
  }

  ChatRequest req;
  req.role = AgentRole::generator;
  req.user = render_prompt(builtin_template(variant), bindings);
  r.generator_prompt = req.user;
  ++calls.generator;
  ChatTranscript t = res.generator->complete(req, gen);
  try {
    r.prediction = parse_answer(t.raw);
  } catch (const ParseError&) {
    r.prediction = Label::no_relation;
    r.parse_failed = true;
  }
  if (variant != TemplateVariant::direct) r.steps = parse_reasoning(t.raw);
  r.transcripts.push_back(std::move(t));

  if (cfg.verify && !r.steps.empty()) {
    VerifierOptions opts;
    opts.candidate_cap = cfg.candidate_cap;
    opts.generation = cfg.verification;
    r.report = verify_chain(r.steps, masked, *res.linker, *res.verifier, opts);
    for (StepVerdict& v : r.report.verdicts) {
      calls.verifier += v.transcripts.size() + (v.verify_failed ? 1 : 0);
      for (ChatTranscript& vt : v.transcripts) r.transcripts.push_back(std::move(vt));
      v.transcripts.clear();
    }
  }
  return r;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view question_id, std::size_t run) {
  return splitmix64(splitmix64(base) ^ splitmix64(fnv1a(question_id) + run));
}

Label vote(std::span<const Label> labels, std::span<const double> confidences) {
  if (labels.empty()) throw InvalidArgument("vote needs at least one label");
  if (labels.size() != confidences.size())
    throw InvalidArgument("vote needs one confidence per label");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> mass{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto slot = static_cast<std::size_t>(labels[i]);
    ++counts[slot];
    mass[slot] += confidences[i];
  }
  std::size_t best = 0;
  for (std::size_t l = 1; l < 3; ++l) {
    if (counts[l] > counts[best] || (counts[l] == counts[best] && mass[l] > mass[best])) best = l;
  }
  return static_cast<Label>(best);
}

std::string kg_context(std::optional<std::string_view> relations,
                       std::optional<std::string_view> documents) {
  std::string out;
  if (relations) {
    out += "Neighbor relations:\n";
    out += *relations;
  }
  if (documents) {
    if (!out.empty()) out += "\n";
    out += "Retrieved documents:\n";
    out += *documents;
  }
  return out;
}

std::string render_documents(const LitIndex& index, std::span<const SearchHit> hits) {
  std::string out;
  for (const SearchHit& h : hits) {
    const Document& d = index.document(*index.find_doc(h.doc_id));
    if (!out.empty()) out += "\n";
    out += "[" + d.doc_id + "] ";
    if (!d.title.empty()) out += d.title + ". ";
    out += d.text;
  }
  return out;
}

std::string enrich_query(const Question& q, std::string_view relations, ChatBackend& llm_e,
                         const GenerationConfig& cfg, bool* fallback,
                         std::vector<ChatTranscript>* transcripts) {
  ChatRequest req;
  req.role = AgentRole::enricher;
  req.user = render_prompt(builtin_template(TemplateVariant::enrich),
                           {{"context", std::string(relations)}, {"question", q.text}});
  ChatTranscript t = llm_e.complete(req, cfg);
  std::string query;
  bool fell_back = false;
  try {
    query = parse_keywords(t.raw);
  } catch (const ParseError&) {
    query = q.text;
    fell_back = true;
  }
  if (fallback != nullptr) *fallback = fell_back;
  if (transcripts != nullptr) transcripts->push_back(std::move(t));
  return query;
}

RunRecord run_instance(const Question& q, const GraphView& masked, const Resources& res,
                       const PipelineConfig& cfg, const GenerationConfig& gen) {
  cfg.validate();
  gen.validate();
  check_resources(res, cfg);
  CallCounts calls;
  std::string last_error;
  for (int n = 1; n <= 2; ++n) {
    try {
      RunRecord r = attempt(q, masked, res, cfg, gen, calls);
      r.attempts = n;
      r.calls = calls;
      return r;
    } catch (const TransportError& e) {
      last_error = e.what();
    } catch (const EndpointError& e) {
      last_error = e.what();
    }
  }
  RunRecord r;
  r.id = q.id;
  r.method = cfg.method;
  r.temperature = gen.temperature;
  r.seed = gen.seed;
  r.prediction = Label::no_relation;
  r.failed = true;
  r.attempts = 2;
  r.calls = calls;
  r.error = last_error;
  return r;
}

AggregateRecord self_consistency(const Question& q, const GraphView& masked,
                                 const Resources& res, const PipelineConfig& cfg, std::size_t n) {
  if (n < 1) throw InvalidArgument("self-consistency needs at least one run");
  if (n > 1 && cfg.generation.greedy())
    throw InvalidArgument("self-consistency with more than one run needs temperature > 0");
  AggregateRecord a;
  a.id = q.id;
  a.method = cfg.method;
  a.n = n;
  std::vector<Label> labels;
  std::vector<double> confs;
  for (std::size_t i = 0; i < n; ++i) {
    GenerationConfig gen = cfg.generation;
    gen.seed = derive_seed(cfg.base_seed, q.id, i);
    RunRecord r = run_instance(q, masked, res, cfg, gen);
    if (!r.failed) {
      labels.push_back(r.prediction);
      confs.push_back(r.report.confidence);
      ++a.votes[static_cast<std::size_t>(r.prediction)];
    }
    a.runs.push_back(std::move(r));
  }
  if (labels.empty()) {
    a.failed = true;
    return a;
  }
  a.voted = vote(labels, confs);
  double sum = 0.0;
  for (double c : confs) sum += c;
  a.confidence = sum / static_cast<double>(confs.size());
  return a;
}

std::map<std::string, GraphView> masked_views(const KnowledgeGraph& g,
                                              std::span<const Question> questions) {
  std::map<std::string, GraphView> views;
  const GraphView base = g.view();
  for (const Question& q : questions) {
    auto [it, inserted] = views.try_emplace(q.id, base.mask(q.mask));
    if (!inserted) throw InvalidArgument("duplicate question id '" + q.id + "'");
  }
  return views;
}

namespace {

AggregateRecord process(const Question& q, const GraphView& view, const Resources& res,
                        const PipelineConfig& cfg, std::size_t n) {
  if (n > 0) return self_consistency(q, view, res, cfg, n);
  RunRecord r = run_instance(q, view, res, cfg, cfg.generation);
  AggregateRecord a;
  a.id = q.id;
  a.method = cfg.method;
  a.n = 1;
  a.voted = r.prediction;
  a.confidence = r.report.confidence;
  a.failed = r.failed;
  if (!r.failed) ++a.votes[static_cast<std::size_t>(r.prediction)];
  a.runs.push_back(std::move(r));
  return a;
}

void sort_by_id(std::vector<AggregateRecord>& out) {
  std::sort(out.begin(), out.end(),
            [](const AggregateRecord& a, const AggregateRecord& b) { return a.id < b.id; });
}

}  // namespace

std::vector<AggregateRecord> run_benchmark(std::span<const Question> questions,
                                           const Resources& res, const PipelineConfig& cfg,
                                           std::size_t n) {
  cfg.validate();
  check_resources(res, cfg);
  const auto views = masked_views(*res.graph, questions);
  std::vector<AggregateRecord> out(questions.size());
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(questions.size());
#pragma omp parallel for schedule(dynamic) num_threads(cfg.parallelism)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[i] = process(questions[i], views.at(questions[i].id), res, cfg, n);
    } catch (...) {
#pragma omp critical(kgcoi_pipeline_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  sort_by_id(out);
  return out;
}

std::vector<AggregateRecord> run_benchmark_serial(std::span<const Question> questions,
                                                  const Resources& res,
                                                  const PipelineConfig& cfg, std::size_t n) {
  cfg.validate();
  check_resources(res, cfg);
  const auto views = masked_views(*res.graph, questions);
  std::vector<AggregateRecord> out;
  out.reserve(questions.size());
  for (const Question& q : questions) out.push_back(process(q, views.at(q.id), res, cfg, n));
  sort_by_id(out);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const RunRecord& r, const KnowledgeGraph& graph) {
  nlohmann::json chains = nlohmann::json::array();
  for (const RelationChain& c : r.chains) {
    chains.push_back(render_chains(std::span<const RelationChain>(&c, 1), graph));
  }
  nlohmann::json verdicts = nlohmann::json::array();
  for (const StepVerdict& v : r.report.verdicts) {
    nlohmann::json j{{"step_index", v.step_index},
                     {"correct", v.correct},
                     {"candidates", v.candidate_triples.size()},
                     {"verify_failed", v.verify_failed}};
    j["supporting_triple"] =
        v.supporting_triple ? nlohmann::json(render_triple(*v.supporting_triple, graph))
                            : nlohmann::json();
    verdicts.push_back(std::move(j));
  }
  nlohmann::json j{{"id", r.id},
                   {"method", to_string(r.method)},
                   {"prediction", to_string(r.prediction)},
                   {"confidence", r.report.confidence},
                   {"parse_failed", r.parse_failed},
                   {"failed", r.failed},
                   {"temperature", r.temperature},
                   {"attempts", r.attempts},
                   {"query", r.query},
                   {"query_fallback", r.query_fallback},
                   {"docs", r.doc_ids},
                   {"chains", chains},
                   {"steps", r.steps},
                   {"verdicts", verdicts},
                   {"calls",
                    {{"enricher", r.calls.enricher},
                     {"generator", r.calls.generator},
                     {"verifier", r.calls.verifier},
                     {"retrievals", r.calls.retrievals},
                     {"chain_searches", r.calls.chain_searches}}}};
  j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json();
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

nlohmann::json to_json(const AggregateRecord& a, const KnowledgeGraph& graph, bool greedy) {
  if (greedy && a.runs.size() == 1) {
    nlohmann::json j = to_json(a.runs.front(), graph);
    j["schema_version"] = kResultsSchemaVersion;
    j["kind"] = "run";
    j["n"] = 1;
    return j;
  }
  nlohmann::json runs = nlohmann::json::array();
  std::size_t parse_failed = 0;
  for (const RunRecord& r : a.runs) {
    runs.push_back(to_json(r, graph));
    parse_failed += (r.parse_failed && !r.failed) ? 1 : 0;
  }
  nlohmann::json votes{{"inhibit", a.votes[0]}, {"no_relation", a.votes[1]}, {"stimulate", a.votes[2]}};
  return {{"schema_version", kResultsSchemaVersion},
          {"kind", "aggregate"},
          {"id", a.id},
          {"method", to_string(a.method)},
          {"n", a.n},
          {"prediction", to_string(a.voted)},
          {"votes", votes},
          {"confidence", a.confidence},
          {"parse_failed", parse_failed > 0 && parse_failed == a.votes[0] + a.votes[1] + a.votes[2]},
          {"parse_failed_runs", parse_failed},
          {"failed", a.failed},
          {"runs", runs}};
}

void write_results(std::ostream& out, std::span<const AggregateRecord> records,
                   const KnowledgeGraph& graph, bool greedy) {
  for (const AggregateRecord& a : records) out << to_json(a, graph, greedy).dump() << '\n';
}

void write_transcripts(std::ostream& out, std::span<const AggregateRecord> records) {
  for (const AggregateRecord& a : records) {
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
      for (const ChatTranscript& t : a.runs[i].transcripts) {
        nlohmann::json j = to_json(t);
        j["id"] = a.id;
        j["run"] = i;
        out << j.dump() << '\n';
      }
    }
  }
}

}  // namespace kgcoi
