#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "kgcoi/cli.hpp"
#include "support.hpp"

using namespace kgcoi;
using kgcoi::testing::fixture;
using kgcoi::testing::slurp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("kgcoi_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> run_args(const fs::path& dir, const std::string& method) {
  return {"run",         "--kg",      fixture("case_kg.tsv").string(),
          "--aliases",   fixture("case_aliases.tsv").string(),
          "--corpus",    fixture("case_corpus.jsonl").string(),
          "--dataset",   fixture("case_dataset.jsonl").string(),
          "--out-dir",   dir.string(),
          "--method",    method};
}

}  // namespace

TEST_CASE("index round trip through the command line") {
  fs::path dir = scratch("index");
  Result r = cli({"index", "--corpus", fixture("corpus100.jsonl").string(), "--out",
                  (dir / "idx.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("indexed 100 documents") != std::string::npos);
  LitIndex back = LitIndex::load(dir / "idx.txt");
  LitIndex fresh = build_index(load_corpus(fixture("corpus100.jsonl")));
  auto a = back.search("liver injury", 5);
  auto b = fresh.search("liver injury", 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].score == b[i].score);
}

TEST_CASE("build-dataset is deterministic") {
  fs::path dir = scratch("dataset");
  fs::path kg = dir / "kg.tsv";
  {
    std::ofstream out(kg);
    KnowledgeGraph g = kgcoi::testing::synthetic_graph(5, 200);
    for (const Triple& t : g.triples()) {
      const Entity& h = g.entity(t.head);
      const Entity& tl = g.entity(t.tail);
      out << h.id.value << '\t' << h.name << '\t' << h.etype << '\t' << t.relation.label << '\t'
          << tl.id.value << '\t' << tl.name << '\t' << tl.etype << '\t' << t.n_pubs << '\n';
    }
  }
  auto args = [&](const std::string& name) {
    return std::vector<std::string>{"build-dataset", "--kg", kg.string(), "--out",
                                    (dir / name).string(), "--per-class", "5", "--seed", "3"};
  };
  Result a = cli(args("a.jsonl"));
  Result b = cli(args("b.jsonl"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(a.out.find("stimulate\t5") != std::string::npos);
  CHECK(load_dataset(dir / "a.jsonl").size() == 15);
}

TEST_CASE("run writes results, transcripts, manifest and summary, then scores") {
  fs::path dir = scratch("run");
  Result r = cli(run_args(dir, "kgcoi"));
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"results.jsonl", "transcripts.jsonl", "verification.jsonl", "manifest.json",
                        "summary.json"})
    CHECK(fs::exists(dir / f));
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.contains("config"));
  CHECK(manifest.contains("inputs"));
  auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["method"] == "kgcoi");

  Result s = cli({"score", "--results", (dir / "results.jsonl").string(), "--dataset",
                  fixture("case_dataset.jsonl").string()});
  REQUIRE(s.code == 0);
  CHECK(s.out.find("Accuracy    100.00") != std::string::npos);
  CHECK(fs::exists(dir / "results.jsonl.score.json"));

  fs::path again = scratch("run_again");
  REQUIRE(cli(run_args(again, "kgcoi")).code == 0);
  CHECK(slurp(dir / "results.jsonl") == slurp(again / "results.jsonl"));
  CHECK(slurp(dir / "transcripts.jsonl") == slurp(again / "transcripts.jsonl"));

  Result v = cli({"verify", "--kg", fixture("case_kg.tsv").string(), "--aliases",
                  fixture("case_aliases.tsv").string(), "--dataset",
                  fixture("case_dataset.jsonl").string(), "--results",
                  (dir / "results.jsonl").string(), "--out", (dir / "reverify.jsonl").string()});
  INFO(v.err);
  CHECK(v.code == 0);
  CHECK(fs::exists(dir / "reverify.jsonl"));
}

TEST_CASE("direct prints zero confidence") {
  fs::path dir = scratch("direct");
  Result r = cli(run_args(dir, "direct"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Confidence  00.00") != std::string::npos);
}

TEST_CASE("self-consistency runs and the scaling report") {
  fs::path one = scratch("sc1");
  fs::path five = scratch("sc5");
  auto a1 = run_args(one, "kgcoi");
  a1.insert(a1.end(), {"--sc", "1", "--noise", "0.2"});
  auto a5 = run_args(five, "kgcoi");
  a5.insert(a5.end(), {"--sc", "5", "--noise", "0.2"});
  REQUIRE(cli(a1).code == 0);
  REQUIRE(cli(a5).code == 0);
  Result rep = cli({"sc-report", "--results", (one / "results.jsonl").string(),
                    (five / "results.jsonl").string(), "--dataset",
                    fixture("case_dataset.jsonl").string(), "--json",
                    (one / "scaling.json").string()});
  REQUIRE(rep.code == 0);
  auto rows = nlohmann::json::parse(slurp(one / "scaling.json"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["n"] == 1);
  CHECK(rows[1]["n"] == 5);
}

TEST_CASE("usage errors") {
  fs::path dir = scratch("usage");
  auto greedy_sc = run_args(dir, "kgcoi");
  greedy_sc.insert(greedy_sc.end(), {"--sc", "5", "--temperature", "0"});
  Result r = cli(greedy_sc);
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());

  auto ablate = run_args(dir, "direct");
  ablate.push_back("--no-kg");
  CHECK(cli(ablate).code == 2);

  CHECK(cli({"run", "--bogus"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"score", "--results", "/nonexistent.jsonl", "--dataset",
             fixture("case_dataset.jsonl").string()})
            .code == 1);
}

TEST_CASE("config file and flags layer") {
  fs::path dir = scratch("config");
  fs::path cfg = dir / "run.conf";
  {
    std::ofstream out(cfg);
    out << "method = direct\n";
  }
  auto args = run_args(dir, "kgcoi");
  // Drop the --method flag so the file value applies.
  args.erase(args.end() - 2, args.end());
  args.insert(args.end(), {"--config", cfg.string()});
  Result r = cli(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("method      direct") != std::string::npos);

  auto flagged = run_args(dir, "cot");
  flagged.insert(flagged.end(), {"--config", cfg.string()});
  Result f = cli(flagged);
  REQUIRE(f.code == 0);
  CHECK(f.out.find("method      cot") != std::string::npos);

  {
    std::ofstream out(cfg);
    out << "api_key = sk-secret\n";
  }
  CHECK(cli(args).code == 2);
}

TEST_CASE("binary exit codes") {
  std::string bin = KGCOI_CLI_PATH;
  int status = std::system((bin + " --help > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(status) == 0);
  status = std::system((bin + " run --nope > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
