#include <doctest.h>

#include <set>
#include <sstream>

#include "kgcoi/errors.hpp"
#include "kgcoi/pipeline.hpp"
#include "support.hpp"

using namespace kgcoi;
using kgcoi::testing::fixture;

namespace {

struct Case {
  KnowledgeGraph g = kgcoi::testing::case_graph();
  LitIndex index = build_index(load_corpus(fixture("case_corpus.jsonl")));
  Lexicon lex = build_lexicon(g);
  DictionaryLinker linker{lex};
  std::vector<Question> questions;
  std::map<std::string, GraphView> views;

  Case() {
    for (const auto& inst : load_dataset(fixture("case_dataset.jsonl")))
      questions.push_back(question_from(inst));
    views = masked_views(g, questions);
  }

  Resources resources(ChatBackend& b) {
    return Resources{&g, &index, &linker, &b, &b, &b};
  }
  const GraphView& view(std::size_t i) const { return views.at(questions[i].id); }
};

PipelineConfig config(Method m) {
  PipelineConfig cfg;
  cfg.method = m;
  return cfg;
}

}  // namespace

TEST_CASE("kgcoi recovers the masked stimulate edge") {
  Case c;
  RuleBasedBackend llm(c.g);
  PipelineConfig cfg = config(Method::kgcoi);
  RunRecord r = run_instance(c.questions[0], c.view(0), c.resources(llm), cfg, cfg.generation);
  CHECK(r.prediction == Label::stimulate);
  CHECK_FALSE(r.parse_failed);
  CHECK_FALSE(r.failed);
  CHECK_FALSE(r.chains.empty());
  for (const RelationChain& ch : r.chains) CHECK(ch.length() == 2);
  CHECK(r.generator_prompt.find("Neighbor relations:\n") != std::string::npos);
  CHECK(r.generator_prompt.find("Retrieved documents:\n[") != std::string::npos);
  CHECK(r.generator_prompt.find("(Carbon Tetrachloride, stimulate, SLC17A5)") == std::string::npos);
  CHECK(r.query == "Carbon Tetrachloride SLC17A5");
  CHECK_FALSE(r.doc_ids.empty());
  CHECK(r.calls.enricher == 1);
  CHECK(r.calls.generator == 1);
  CHECK(r.calls.retrievals == 1);
  CHECK(r.calls.chain_searches == 1);
  CHECK(r.calls.verifier >= r.steps.size());
  REQUIRE_FALSE(r.steps.empty());
  CHECK(r.report.confidence == 1.0);
  CHECK(r.transcripts.size() == 2 + r.calls.verifier);
}

TEST_CASE("direct and the no_relation question") {
  Case c;
  RuleBasedBackend llm(c.g);
  PipelineConfig cfg = config(Method::direct);
  RunRecord r = run_instance(c.questions[0], c.view(0), c.resources(llm), cfg, cfg.generation);
  CHECK(r.prediction == Label::no_relation);
  CHECK(r.steps.empty());
  CHECK(r.report.confidence == 0.0);
  CHECK(r.calls.verifier == 0);
  CHECK(r.calls.enricher == 0);
  CHECK(r.calls.retrievals == 0);

  PipelineConfig kg = config(Method::kgcoi);
  RunRecord none = run_instance(c.questions[2], c.view(2), c.resources(llm), kg, kg.generation);
  CHECK(none.prediction == Label::no_relation);
}

TEST_CASE("rag retrieves with the question text") {
  Case c;
  RuleBasedBackend llm(c.g);
  PipelineConfig cfg = config(Method::rag);
  RunRecord r = run_instance(c.questions[1], c.view(1), c.resources(llm), cfg, cfg.generation);
  CHECK(r.query == c.questions[1].text);
  CHECK(r.calls.retrievals == 1);
  CHECK(r.calls.enricher == 0);
  CHECK(r.calls.chain_searches == 0);
  CHECK(r.generator_prompt.find("Neighbor relations") == std::string::npos);
}

TEST_CASE("ablations remove one ingredient each") {
  Case c;
  RuleBasedBackend llm(c.g);
  auto run = [&](Ablation ab) {
    PipelineConfig cfg = config(Method::kgcoi);
    cfg.ablation = ab;
    return run_instance(c.questions[0], c.view(0), c.resources(llm), cfg, cfg.generation);
  };

  RunRecord no_kg = run({.no_kg = true});
  CHECK(no_kg.calls.chain_searches == 0);
  CHECK(no_kg.generator_prompt.find("Neighbor relations") == std::string::npos);
  CHECK(no_kg.generator_prompt.find("Retrieved documents") != std::string::npos);
  CHECK(no_kg.prediction == Label::no_relation);

  RunRecord no_lit = run({.no_literature = true});
  CHECK(no_lit.calls.enricher == 0);
  CHECK(no_lit.calls.retrievals == 0);
  CHECK(no_lit.generator_prompt.find("Retrieved documents") == std::string::npos);
  CHECK(no_lit.prediction == Label::stimulate);

  RunRecord no_enrich = run({.no_enrichment = true});
  CHECK(no_enrich.calls.enricher == 0);
  CHECK(no_enrich.calls.retrievals == 1);
  CHECK(no_enrich.query == c.questions[0].text);

  RunRecord no_cot = run({.no_cot = true});
  CHECK(no_cot.steps.empty());
  CHECK(no_cot.calls.verifier == 0);
  CHECK(no_cot.generator_prompt.find("your_reasoning_steps") == std::string::npos);
  CHECK(no_cot.generator_prompt.find("\n\nContext: Neighbor relations:\n") != std::string::npos);
}

TEST_CASE("unparseable answers fall back to no_relation") {
  Case c;
  ScriptedBackend llm({ScriptRule{AgentRole::generator, "", {"I cannot say."}, false}});
  PipelineConfig cfg = config(Method::cot);
  cfg.verify = false;
  RunRecord r = run_instance(c.questions[1], c.view(1), c.resources(llm), cfg, cfg.generation);
  CHECK(r.parse_failed);
  CHECK(r.prediction == Label::no_relation);
  CHECK_FALSE(r.failed);
}

TEST_CASE("transport failures retry once, then mark the record failed") {
  Case c;
  ScriptedBackend llm({ScriptRule{AgentRole::generator, "", {}, true}});
  PipelineConfig cfg = config(Method::direct);
  RunRecord r = run_instance(c.questions[1], c.view(1), c.resources(llm), cfg, cfg.generation);
  CHECK(r.failed);
  CHECK(r.attempts == 2);
  CHECK(r.calls.generator == 2);
  CHECK(r.prediction == Label::no_relation);
  CHECK_FALSE(r.error.empty());
}

TEST_CASE("missing resources are rejected") {
  Case c;
  RuleBasedBackend llm(c.g);
  Resources res = c.resources(llm);
  res.index = nullptr;
  PipelineConfig cfg = config(Method::rag);
  CHECK_THROWS_AS(run_instance(c.questions[0], c.view(0), res, cfg, cfg.generation),
                  InvalidArgument);
}

TEST_CASE("voting") {
  using L = Label;
  std::vector<L> a = {L::stimulate, L::inhibit, L::stimulate};
  CHECK(vote(a, std::vector<double>{0, 0, 0}) == L::stimulate);
  std::vector<L> tie = {L::stimulate, L::inhibit};
  CHECK(vote(tie, std::vector<double>{0.2, 0.1}) == L::stimulate);
  CHECK(vote(tie, std::vector<double>{0.1, 0.2}) == L::inhibit);
  CHECK(vote(tie, std::vector<double>{0.5, 0.5}) == L::inhibit);
  std::vector<L> three = {L::stimulate, L::no_relation, L::inhibit};
  CHECK(vote(three, std::vector<double>{0, 0, 0}) == L::inhibit);
  CHECK_THROWS_AS(vote({}, {}), InvalidArgument);
}

TEST_CASE("seeds") {
  CHECK(derive_seed(1, "q0001", 0) == derive_seed(1, "q0001", 0));
  std::set<std::uint64_t> seen;
  for (std::size_t run = 0; run < 5; ++run)
    for (const char* id : {"q0001", "q0002", "q0003"})
      for (std::uint64_t base : {0u, 1u}) seen.insert(derive_seed(base, id, run));
  CHECK(seen.size() == 30);
}

TEST_CASE("self-consistency") {
  Case c;
  RuleBasedBackend llm(c.g, 0.3);
  PipelineConfig cfg = config(Method::kgcoi);
  CHECK_THROWS_AS(self_consistency(c.questions[0], c.view(0), c.resources(llm), cfg, 5),
                  InvalidArgument);
  cfg.generation.temperature = 0.7;
  cfg.base_seed = 17;
  AggregateRecord a = self_consistency(c.questions[0], c.view(0), c.resources(llm), cfg, 5);
  CHECK(a.runs.size() == 5);
  CHECK(a.votes[0] + a.votes[1] + a.votes[2] == 5);
  std::set<std::uint64_t> seeds;
  for (const RunRecord& r : a.runs) seeds.insert(*r.seed);
  CHECK(seeds.size() == 5);
  double sum = 0.0;
  for (const RunRecord& r : a.runs) sum += r.report.confidence;
  CHECK(a.confidence == doctest::Approx(sum / 5).epsilon(1e-12));

  AggregateRecord again = self_consistency(c.questions[0], c.view(0), c.resources(llm), cfg, 5);
  CHECK(again.voted == a.voted);
  CHECK(again.votes == a.votes);
}

TEST_CASE("every run failing gives a failed aggregate") {
  Case c;
  ScriptedBackend llm({ScriptRule{std::nullopt, "", {}, true}});
  PipelineConfig cfg = config(Method::direct);
  cfg.generation.temperature = 0.7;
  AggregateRecord a = self_consistency(c.questions[0], c.view(0), c.resources(llm), cfg, 3);
  CHECK(a.failed);
  CHECK(a.voted == Label::no_relation);
  CHECK(a.votes == std::array<std::size_t, 3>{0, 0, 0});
}

TEST_CASE("benchmark runs are deterministic and match the serial reference") {
  Case c;
  RuleBasedBackend llm(c.g, 0.2);
  PipelineConfig cfg = config(Method::kgcoi);
  cfg.generation.temperature = 0.7;
  cfg.parallelism = 4;
  auto par = run_benchmark(c.questions, c.resources(llm), cfg, 3);
  auto ser = run_benchmark_serial(c.questions, c.resources(llm), cfg, 3);
  std::ostringstream a, b, ta, tb;
  write_results(a, par, c.g, false);
  write_results(b, ser, c.g, false);
  write_transcripts(ta, par);
  write_transcripts(tb, ser);
  CHECK(a.str() == b.str());
  CHECK(ta.str() == tb.str());
  REQUIRE(par.size() == 3);
  CHECK(par[0].id == "q0001");
}

TEST_CASE("results serialization") {
  Case c;
  RuleBasedBackend llm(c.g);
  PipelineConfig cfg = config(Method::kgcoi);
  auto recs = run_benchmark(c.questions, c.resources(llm), cfg, 0);
  std::ostringstream out;
  write_results(out, recs, c.g, true);
  std::istringstream lines(out.str());
  std::vector<nlohmann::json> js;
  for (std::string line; std::getline(lines, line);) js.push_back(nlohmann::json::parse(line));
  REQUIRE(js.size() == 3);
  CHECK(js[0]["schema_version"] == 1);
  CHECK(js[0]["kind"] == "run");
  CHECK(js[0]["id"] == "q0001");
  CHECK(js[0]["prediction"] == "stimulate");
  CHECK(js[0]["method"] == "kgcoi");

  std::ostringstream agg;
  cfg.generation.temperature = 0.7;
  auto sc = run_benchmark(c.questions, c.resources(llm), cfg, 2);
  write_results(agg, sc, c.g, false);
  auto first = nlohmann::json::parse(agg.str().substr(0, agg.str().find('\n')));
  CHECK(first["kind"] == "aggregate");
  CHECK(first["n"] == 2);
  CHECK(first["runs"].size() == 2);
}

TEST_CASE("context assembly") {
  CHECK(kg_context(std::nullopt, std::nullopt).empty());
  CHECK(kg_context("(A, cause, B)", std::nullopt) == "Neighbor relations:\n(A, cause, B)");
  CHECK(kg_context(std::nullopt, "[d1] T. x") == "Retrieved documents:\n[d1] T. x");
  CHECK(kg_context("r", "d") == "Neighbor relations:\nr\nRetrieved documents:\nd");
  CHECK(method_from_string("kgcoi") == Method::kgcoi);
  CHECK_THROWS_AS(method_from_string("magic"), InvalidArgument);
}
