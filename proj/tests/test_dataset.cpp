#include <doctest.h>

#include <sstream>

#include "kgcoi/dataset.hpp"
#include "kgcoi/errors.hpp"
#include "support.hpp"

using namespace kgcoi;
using kgcoi::testing::graph_from_rows;

namespace {

BuilderConfig small_cfg(std::size_t per_class, std::uint64_t seed) {
  BuilderConfig cfg;
  cfg.per_class = per_class;
  cfg.seed = seed;
  cfg.restart_budget = 200;
  return cfg;
}

std::string dump(const std::vector<DatasetInstance>& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

}  // namespace

TEST_CASE("opposite polarity below half is accepted") {
  KnowledgeGraph g = graph_from_rows(
      "A\tA\tGENE\tstimulate\tC\tC\tGENE\t8\n"
      "A\tA\tGENE\tinhibit\tC\tC\tGENE\t3\n");
  Rng rng(1);
  DatasetInstance inst = sample_positive(g, rng, small_cfg(1, 1));
  CHECK(inst.label == Label::stimulate);
  CHECK(inst.mask.mode == MaskMode::edge);
  CHECK(inst.mask.relation->label == "stimulate");
  CHECK(polar_pubs(g, EntityId("A"), EntityId("C"), Label::inhibit) == 3);
}

TEST_CASE("opposite polarity at or above half is rejected") {
  KnowledgeGraph g = graph_from_rows(
      "X\tX\tGENE\tstimulate\tY\tY\tGENE\t8\n"
      "X\tX\tGENE\tinhibit\tY\tY\tGENE\t5\n");
  Rng rng(1);
  CHECK_THROWS_AS(sample_positive(g, rng, small_cfg(1, 1)), SamplingExhausted);

  // Exactly half is still too many.
  KnowledgeGraph edge = graph_from_rows(
      "X\tX\tGENE\tstimulate\tY\tY\tGENE\t8\n"
      "X\tX\tGENE\tnegative_correlate\tY\tY\tGENE\t4\n");
  CHECK_THROWS_AS(sample_positive(edge, rng, small_cfg(1, 1)), SamplingExhausted);
}

TEST_CASE("graph without polar triples exhausts") {
  KnowledgeGraph g = graph_from_rows("A\tA\tGENE\tassociate\tB\tB\tGENE\t3\n");
  Rng rng(3);
  CHECK_THROWS_AS(sample_positive(g, rng, small_cfg(1, 3)), SamplingExhausted);
}

TEST_CASE("no_relation pairs on the toy graph") {
  KnowledgeGraph g = kgcoi::testing::toy_graph();
  std::vector<EntityId> pool = {EntityId("A"), EntityId("B"), EntityId("C"), EntityId("D")};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    DatasetInstance inst = sample_no_relation(g, pool, rng, small_cfg(1, seed));
    CHECK(inst.label == Label::no_relation);
    auto key = pair_key(inst.head, inst.tail);
    bool ok = key == std::pair<std::string, std::string>{"A", "D"} ||
              key == std::pair<std::string, std::string>{"B", "D"};
    CHECK(ok);
    CHECK(inst.mask.mode == MaskMode::pair);
  }

  std::vector<EntityId> linked = {EntityId("A"), EntityId("B")};
  Rng rng(0);
  CHECK_THROWS_AS(sample_no_relation(g, linked, rng, small_cfg(1, 0)), SamplingExhausted);

  PairSet used = {pair_key(EntityId("A"), EntityId("D"))};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(seed);
    DatasetInstance inst = sample_no_relation(g, pool, r, small_cfg(1, seed), used);
    CHECK(pair_key(inst.head, inst.tail) == std::pair<std::string, std::string>{"B", "D"});
  }
}

TEST_CASE("one per class on a 20-node synthetic graph") {
  KnowledgeGraph g = kgcoi::testing::synthetic_graph(11, 20);
  BuilderConfig cfg = small_cfg(1, 11);
  auto ds = build_dataset(g, cfg);
  REQUIRE(ds.size() == 3);
  std::array<int, 3> counts{};
  for (const auto& inst : ds) ++counts[static_cast<int>(inst.label)];
  CHECK(counts == std::array<int, 3>{1, 1, 1});
  CHECK(kgcoi::testing::validate_dataset(g, ds, cfg).empty());
}

TEST_CASE("larger datasets validate, stay balanced and are deterministic") {
  KnowledgeGraph g = kgcoi::testing::synthetic_graph(3, 400);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    BuilderConfig cfg = small_cfg(20, seed);
    cfg.restart_budget = 10000;
    auto a = build_dataset(g, cfg);
    auto b = build_dataset(g, cfg);
    CHECK(dump(a) == dump(b));
    REQUIRE(a.size() == 60);
    auto problems = kgcoi::testing::validate_dataset(g, a, cfg);
    for (const auto& p : problems) MESSAGE(p);
    CHECK(problems.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
      char want[8];
      std::snprintf(want, sizeof want, "q%04zu", i + 1);
      CHECK(a[i].id == want);
      if (a[i].label != Label::no_relation) {
        GraphView masked = g.view().mask(a[i].mask);
        for (const Triple& t : masked.direct_relations(a[i].head, a[i].tail))
          CHECK_FALSE(t.relation == *a[i].mask.relation);
      }
    }
  }
  BuilderConfig other = small_cfg(20, 99);
  other.restart_budget = 10000;
  CHECK(dump(build_dataset(g, other)) != dump(build_dataset(g, small_cfg(20, 1))));
}

TEST_CASE("dataset JSON lines round trip") {
  auto ds = load_dataset(kgcoi::testing::fixture("case_dataset.jsonl"));
  REQUIRE(ds.size() == 3);
  CHECK(ds[0].label == Label::stimulate);
  CHECK(ds[2].mask.mode == MaskMode::pair);
  CHECK(ds[0].question == question_text("Carbon Tetrachloride", "SLC17A5"));
  std::istringstream in(dump(ds));
  CHECK(parse_dataset(in) == ds);

  std::istringstream bad(R"({"id": "q1", "head_id": "A"})" "\n");
  CHECK_THROWS_AS(parse_dataset(bad), ParseError);
  std::istringstream label(
      R"({"id":"q1","head_id":"A","tail_id":"B","head_name":"A","tail_name":"B",)"
      R"("label":"maybe","question":"?","mask":{"mode":"pair","relation":null},"provenance":[]})"
      "\n");
  CHECK_THROWS_AS(parse_dataset(label), ParseError);
}

TEST_CASE("config validation and rng") {
  BuilderConfig cfg;
  cfg.per_class = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.per_class = 1;
  cfg.threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.below(7) == b.below(7));
  Rng c(9);
  for (int i = 0; i < 1000; ++i) CHECK(c.below(3) < 3);
}
