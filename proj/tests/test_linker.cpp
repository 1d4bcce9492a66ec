#include <doctest.h>

#include <random>

#include "kgcoi/errors.hpp"
#include "kgcoi/linker.hpp"
#include "support.hpp"

using namespace kgcoi;
using kgcoi::testing::graph_from_rows;

namespace {

std::vector<std::string> ids(const std::vector<Mention>& ms) {
  std::vector<std::string> out;
  for (const Mention& m : ms) out.push_back(m.entity.value);
  return out;
}

}  // namespace

TEST_CASE("lexicon entries") {
  KnowledgeGraph toy = kgcoi::testing::toy_graph();
  Lexicon lex = build_lexicon(toy);
  CHECK(lex.size() == 4);

  KnowledgeGraph cs = kgcoi::testing::case_graph();
  Lexicon clex = build_lexicon(cs);
  REQUIRE(clex.lookup("ccl4"));
  CHECK(clex.lookup("ccl4")->value == "MESH:D002251");
  CHECK(clex.lookup("CCl4") == nullptr);
}

TEST_CASE("alias collision goes to the smaller id") {
  GraphBuilder b;
  b.add_entity(EntityId("Gene:7157"), "TP53", "GENE");
  b.add_entity(EntityId("Gene:22059"), "Trp53", "GENE");
  b.add_alias(EntityId("Gene:7157"), "p53");
  b.add_alias(EntityId("Gene:22059"), "p53");
  KnowledgeGraph g = std::move(b).build();
  Lexicon lex = build_lexicon(g);
  REQUIRE(lex.lookup("p53"));
  CHECK(lex.lookup("p53")->value == "Gene:22059");
  REQUIRE(lex.collisions().size() == 1);
  CHECK(lex.collisions()[0].surface == "p53");
  CHECK(lex.collisions()[0].kept.value == "Gene:22059");
  CHECK(lex.collisions()[0].dropped.value == "Gene:7157");
}

TEST_CASE("linking examples") {
  KnowledgeGraph cs = kgcoi::testing::case_graph();
  Lexicon lex = build_lexicon(cs);
  std::string text = "Ruxolitinib is a JAK1 inhibitor.";
  auto ms = link(text, lex);
  REQUIRE(ms.size() == 2);
  CHECK(ms[0].surface == "Ruxolitinib");
  CHECK(ms[0].entity.value == "MESH:C540383");
  CHECK(text.substr(ms[1].start, ms[1].end - ms[1].start) == "JAK1");

  CHECK(link("no entities here", build_lexicon(kgcoi::testing::toy_graph())).empty());

  KnowledgeGraph nested = graph_from_rows(
      "L\tliver\tDISEASE\tassociate\tLF\tliver failure\tDISEASE\t1\n");
  auto longest = link("liver failure occurred", build_lexicon(nested));
  REQUIRE(longest.size() == 1);
  CHECK(longest[0].surface == "liver failure");
  CHECK(longest[0].entity.value == "LF");
}

TEST_CASE("pre-normalized text links to the same entities") {
  KnowledgeGraph cs = kgcoi::testing::case_graph();
  Lexicon lex = build_lexicon(cs);
  std::string raw = "Carbon-Tetrachloride (CCl4) induces Liver   Failure; SLC17A5?";
  auto a = link(raw, lex);
  auto b = link(normalize_surface(raw), lex);
  CHECK(ids(a) == ids(b));
  CHECK(ids(a) == std::vector<std::string>{"MESH:D002251", "MESH:D002251", "MESH:D017093",
                                           "Gene:26503"});
}

TEST_CASE("greedy linker agrees with the brute-force matcher") {
  KnowledgeGraph cs = kgcoi::testing::case_graph();
  Lexicon lex = build_lexicon(cs);
  std::vector<std::string> vocab;
  for (const auto& [surface, id] : lex.entries()) vocab.push_back(surface);
  std::sort(vocab.begin(), vocab.end());
  for (const char* filler : {"the", "and", "liver", "drug", "induced", "of", "chemical", "failure",
                             "injury", "carbon", "x"})
    vocab.emplace_back(filler);

  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    std::size_t words = 1 + rng() % 60;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += (rng() % 5 == 0) ? ", " : " ";
      std::string word = vocab[rng() % vocab.size()];
      if (rng() % 3 == 0)
        for (char& c : word) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      text += word;
    }
    auto got = link(text, lex);
    auto want = kgcoi::testing::brute_force_link(text, lex);
    REQUIRE(got == want);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].end <= got[i].start);
  }
}

TEST_CASE("NER response parsing") {
  std::string text = "JAK1 is inhibited by ruxolitinib";
  auto ms = parse_ner_response(
      R"({"mentions":[{"surface":"JAK1","entity_id":"Gene:3716","start":0,"end":4}]})", text);
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].entity.value == "Gene:3716");
  CHECK_THROWS_AS(parse_ner_response("{", text), ParseError);
  CHECK_THROWS_AS(
      parse_ner_response(
          R"({"mentions":[{"surface":"x","entity_id":"a","start":0,"end":400}]})", text),
      ParseError);
  CHECK(format_ner_request("a\"b") == R"({"text":"a\"b"})");
}

TEST_CASE("external NER process") {
  std::string cmd = std::string(KGCOI_PYTHON) + " " + KGCOI_NER_SCRIPT;
  ProcessNerLinker ner(cmd);
  auto ms = ner.extract("Ruxolitinib is a JAK1 inhibitor.");
  CHECK(ids(ms) == std::vector<std::string>{"MESH:C540383", "Gene:3716"});
  auto again = ner.extract("nothing to see");
  CHECK(again.empty());
  CHECK(ids(ner.extract("JAK1 and jak1")) == std::vector<std::string>{"Gene:3716", "Gene:3716"});
}
