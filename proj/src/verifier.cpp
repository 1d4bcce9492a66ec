#include "kgcoi/verifier.hpp"

#include <algorithm>
#include <exception>
#include <ostream>

#include <json.hpp>

#include "kgcoi/errors.hpp"
#include "kgcoi/parse.hpp"

namespace kgcoi {

std::vector<std::uint32_t> candidate_triples(const GraphView& view,
                                             std::span<const Mention> mentions, std::size_t cap) {
  const KnowledgeGraph& g = view.graph();
  std::vector<std::uint32_t> ids;
  for (const Mention& m : mentions) {
    if (auto i = g.find(m.entity)) ids.push_back(*i);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<std::uint32_t> out;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    for (std::size_t k = j + 1; k < ids.size(); ++k) {
      auto found = view.direct_relation_indices(ids[j], ids[k]);
      out.insert(out.end(), found.begin(), found.end());
    }
  }
  std::sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
    return canonical_less(g.triples()[a], g.triples()[b]);
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() > cap) out.resize(cap);
  return out;
}

std::string render_triple(const Triple& t, const KnowledgeGraph& graph) {
  return "(" + graph.entity(t.head).name + ", " + t.relation.label + ", " +
         graph.entity(t.tail).name + ")";
}

StepVerdict verify_step(std::string_view step, std::size_t step_index, const GraphView& view,
                        const MentionExtractor& linker, ChatBackend& llm_v,
                        const VerifierOptions& options) {
  const KnowledgeGraph& g = view.graph();
  StepVerdict v;
  v.step_index = step_index;
  v.step_text = std::string(step);
  v.mentions = linker.extract(step);
  for (std::uint32_t t : candidate_triples(view, v.mentions, options.candidate_cap)) {
    v.candidate_triples.push_back(g.triples()[t]);
  }

  const PromptTemplate& tmpl = builtin_template(TemplateVariant::verify);
  for (const Triple& t : v.candidate_triples) {
    ChatRequest req;
    req.role = AgentRole::verifier;
    req.user = render_prompt(tmpl, {{"relation", render_triple(t, g)}, {"sentence", v.step_text}});
    ChatTranscript tr;
    try {
      tr = llm_v.complete(req, options.generation);
    } catch (const TransportError& e) {
      v.verify_failed = true;
      v.error = e.what();
      break;
    } catch (const EndpointError& e) {
      v.verify_failed = true;
      v.error = e.what();
      break;
    }
    TripleVerdict tv{t, false, false};
    try {
      tv.affirmed = parse_verdict(tr.raw);
    } catch (const ParseError&) {
      tv.parse_failed = true;
    }
    v.transcripts.push_back(std::move(tr));
    v.adjudications.push_back(tv);
    if (tv.affirmed) {
      v.supporting_triple = t;
      v.correct = true;
      break;
    }
  }
  return v;
}

double confidence(std::span<const StepVerdict> verdicts) {
  if (verdicts.empty()) return 0.0;
  std::size_t correct = 0;
  for (const StepVerdict& v : verdicts) correct += v.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(verdicts.size());
}

double confidence(std::span<const bool> correctness) {
  if (correctness.empty()) return 0.0;
  auto correct = std::count(correctness.begin(), correctness.end(), true);
  return static_cast<double>(correct) / static_cast<double>(correctness.size());
}

ConfidenceReport verify_chain(std::span<const std::string> steps, const GraphView& view,
                              const MentionExtractor& linker, ChatBackend& llm_v,
                              const VerifierOptions& options) {
  ConfidenceReport report;
  report.verdicts.resize(steps.size());
  const auto n = static_cast<std::ptrdiff_t>(steps.size());
  if (options.parallel_steps) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        report.verdicts[i] = verify_step(steps[i], i + 1, view, linker, llm_v, options);
      } catch (...) {
#pragma omp critical(kgcoi_verify_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      report.verdicts[i] = verify_step(steps[i], i + 1, view, linker, llm_v, options);
    }
  }
  report.confidence = confidence(report.verdicts);
  return report;
}

nlohmann::json to_json(const Triple& t) {
  return {{"head", t.head.value},
          {"relation", t.relation.label},
          {"tail", t.tail.value},
          {"n_pubs", t.n_pubs}};
}

nlohmann::json to_json(const StepVerdict& v, const KnowledgeGraph& graph) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const Mention& m : v.mentions) {
    mentions.push_back(
        {{"entity_id", m.entity.value}, {"surface", m.surface}, {"start", m.start}, {"end", m.end}});
  }
  nlohmann::json candidates = nlohmann::json::array();
  for (const Triple& t : v.candidate_triples) candidates.push_back(to_json(t));
  nlohmann::json rulings = nlohmann::json::array();
  for (const TripleVerdict& tv : v.adjudications) {
    rulings.push_back({{"triple", render_triple(tv.triple, graph)},
                       {"affirmed", tv.affirmed},
                       {"parse_failed", tv.parse_failed}});
  }
  nlohmann::json j{{"step_index", v.step_index},  {"step", v.step_text},
                   {"mentions", mentions},        {"candidate_triples", candidates},
                   {"verdicts", rulings},         {"correct", v.correct},
                   {"verify_failed", v.verify_failed}};
  j["supporting_triple"] = v.supporting_triple ? to_json(*v.supporting_triple) : nlohmann::json();
  if (!v.error.empty()) j["error"] = v.error;
  return j;
}

void write_verification_log(std::ostream& out, std::string_view question_id,
                            const ConfidenceReport& report, const KnowledgeGraph& graph) {
  for (const StepVerdict& v : report.verdicts) {
    nlohmann::json j = to_json(v, graph);
    j["id"] = question_id;
    out << j.dump() << '\n';
  }
}

}  // namespace kgcoi
