#include "kgcoi/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgcoi/bm25.hpp"
#include "kgcoi/chat.hpp"
#include "kgcoi/dataset.hpp"
#include "kgcoi/errors.hpp"
#include "kgcoi/evalbench.hpp"
#include "kgcoi/graph.hpp"
#include "kgcoi/linker.hpp"
#include "kgcoi/pipeline.hpp"
#include "kgcoi/text.hpp"
#include "kgcoi/verifier.hpp"

namespace fs = std::filesystem;

namespace kgcoi {

namespace {

// ---------------------------------------------------------------------------
// Layered settings for run and verify. Every flag doubles as a config-file
// key; sources are applied as defaults < environment < config file < flags.

struct Setting {
  const char* name;
  const char* help;
  const char* fallback;  // nullptr: no default
  bool flag = false;
};

constexpr Setting kRunSettings[] = {
    {"kg", "knowledge graph TSV", nullptr},
    {"aliases", "entity alias TSV (entity_id<TAB>alias)", nullptr},
    {"corpus", "literature corpus JSONL (indexed in memory)", nullptr},
    {"index", "prebuilt index file from `kgcoi index`", nullptr},
    {"dataset", "dataset JSONL from `kgcoi build-dataset`", nullptr},
    {"out-dir", "directory for results, transcripts, logs and manifest", nullptr},
    {"method", "direct | cot | rag | kgcoi", "kgcoi"},
    {"backend", "rule | scripted | http", "rule"},
    {"script", "scripted replies JSONL; with backend=rule it is consulted first", nullptr},
    {"noise", "label flip probability of the rule backend on sampled calls", "0"},
    {"sc", "self-consistency runs per question (0 = greedy)", "0"},
    {"temperature", "sampling temperature (0.7 when --sc is set and this is not)", "0"},
    {"seed", "base seed for run seeds", "0"},
    {"max-tokens", "completion token cap", "1024"},
    {"k", "maximum relation chain length", "2"},
    {"chain-limit", "maximum chains per question", "50"},
    {"top-k", "documents retrieved per question", "5"},
    {"candidate-cap", "candidate triples verified per step", "20"},
    {"no-kg", "ablation: drop KG relation chains", nullptr, true},
    {"no-literature", "ablation: drop enrichment and retrieval", nullptr, true},
    {"no-enrichment", "ablation: retrieve with the raw question", nullptr, true},
    {"no-cot", "ablation: answer without reasoning steps", nullptr, true},
    {"no-verify", "skip step verification", nullptr, true},
    {"concurrency", "questions processed in parallel", "1"},
    {"ner-command", "external NER command speaking the JSON line protocol", nullptr},
    {"base-url", "chat-completions base URL", "https://api.openai.com/v1"},
    {"api-key-env", "environment variable holding the API key", "OPENAI_API_KEY"},
    {"model", "model for every role", "gpt-4o-mini"},
    {"model-enricher", "model for the enricher role", nullptr},
    {"model-generator", "model for the generator role", nullptr},
    {"model-verifier", "model for the verifier role", nullptr},
    {"timeout-ms", "HTTP timeout", "60000"},
    {"retry-cap", "retries on transient HTTP failures", "4"},
    {"requests-per-second", "HTTP rate budget (0 = unlimited)", "0"},
    {"http-concurrency", "HTTP requests in flight", "4"},
    {"results", "results JSONL to re-verify (verify only)", nullptr},
    {"out", "verification log path (verify only)", nullptr},
};

const std::map<std::string, std::string> kEnvironment = {
    {"KGCOI_BASE_URL", "base-url"},
    {"KGCOI_API_KEY_ENV", "api-key-env"},
    {"KGCOI_MODEL", "model"},
};

enum class Source { fallback, environment, file, flag };

class Settings {
public:
  void set(const std::string& key, std::string value, Source source) {
    values_[key] = {std::move(value), source};
  }
  bool has(const std::string& key) const { return values_.contains(key); }
  Source source(const std::string& key) const { return values_.at(key).second; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second.first;
  }
  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v || v->empty()) throw UsageError("--" + key + " is required");
    return *v;
  }
  bool flag(const std::string& key) const {
    auto v = get(key);
    if (!v) return false;
    std::string s = text::to_lower(*v);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no" || s.empty()) return false;
    throw UsageError("--" + key + " expects true or false, got '" + *v + "'");
  }
  std::size_t size(const std::string& key) const {
    auto v = get(key).value_or("0");
    try {
      std::size_t used = 0;
      long long n = std::stoll(v, &used);
      if (used != v.size() || n < 0) throw std::invalid_argument(v);
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw UsageError("--" + key + " expects a non-negative integer, got '" + v + "'");
    }
  }
  double real(const std::string& key) const {
    auto v = get(key).value_or("0");
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw UsageError("--" + key + " expects a number, got '" + v + "'");
    }
  }

  nlohmann::json snapshot() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v.first;
    return j;
  }

private:
  std::map<std::string, std::pair<std::string, Source>> values_;
};

const Setting* find_setting(const std::string& name) {
  for (const Setting& s : kRunSettings) {
    if (name == s.name) return &s;
  }
  return nullptr;
}

// Flag storage registered with CLI11 for one subcommand.
struct FlagBindings {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
  std::string config;
  std::string format = "text";
};

void register_settings(CLI::App* sub, FlagBindings& b, std::initializer_list<const char*> names) {
  sub->add_option("--config", b.config, "key = value file using the flag names as keys");
  sub->add_option("--format", b.format, "text | json")->check(CLI::IsMember({"text", "json"}));
  for (const char* name : names) {
    const Setting* s = find_setting(name);
    std::string help = s->help;
    if (s->fallback != nullptr && *s->fallback != '\0') help += " [" + std::string(s->fallback) + "]";
    if (s->flag) {
      b.options[name] = sub->add_flag("--" + std::string(name), b.flags[name], help);
    } else {
      b.options[name] = sub->add_option("--" + std::string(name), b.values[name], help);
    }
  }
}

Settings resolve_settings(const FlagBindings& b) {
  Settings s;
  for (const auto& [name, opt] : b.options) {
    const Setting* def = find_setting(name);
    if (def->fallback != nullptr) s.set(name, def->fallback, Source::fallback);
  }
  for (const auto& [var, key] : kEnvironment) {
    if (!b.options.contains(key)) continue;
    if (const char* v = std::getenv(var.c_str())) s.set(key, v, Source::environment);
  }
  if (!b.config.empty()) {
    std::ifstream in(b.config);
    if (!in) throw UsageError("cannot read config file " + b.config);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      std::string_view v = text::trim(line);
      if (v.empty() || v.front() == '#') continue;
      auto eq = v.find('=');
      if (eq == std::string_view::npos)
        throw UsageError(b.config + ":" + std::to_string(number) + ": expected key = value");
      std::string key(text::trim(v.substr(0, eq)));
      for (char& c : key) {
        if (c == '_') c = '-';
      }
      if (key == "api-key")
        throw UsageError("API keys are read from the environment only; set --api-key-env");
      if (!b.options.contains(key))
        throw UsageError(b.config + ":" + std::to_string(number) + ": unknown key '" + key + "'");
      s.set(key, std::string(text::trim(v.substr(eq + 1))), Source::file);
    }
  }
  for (const auto& [name, opt] : b.options) {
    if (opt->count() == 0) continue;
    if (find_setting(name)->flag) {
      s.set(name, "true", Source::flag);
    } else {
      s.set(name, b.values.at(name), Source::flag);
    }
  }
  return s;
}

void require_file(const Settings& s, const std::string& key) {
  std::string path = s.require(key);
  if (!fs::exists(path)) throw UsageError("--" + key + ": no such file: " + path);
}

// ---------------------------------------------------------------------------
// Shared loading

KnowledgeGraph load_graph(const Settings& s) {
  LoadOptions opts;
  if (auto a = s.get("aliases"); a && !a->empty()) opts.aliases = fs::path(*a);
  return load_kg(s.require("kg"), opts);
}

EndpointConfig endpoint_from(const Settings& s) {
  EndpointConfig e;
  e.base_url = s.require("base-url");
  e.api_key_env = s.require("api-key-env");
  const std::string model = s.require("model");
  for (auto& [role, m] : e.models) m = model;
  if (auto m = s.get("model-enricher"); m && !m->empty()) e.models[AgentRole::enricher] = *m;
  if (auto m = s.get("model-generator"); m && !m->empty()) e.models[AgentRole::generator] = *m;
  if (auto m = s.get("model-verifier"); m && !m->empty()) e.models[AgentRole::verifier] = *m;
  e.timeout = std::chrono::milliseconds(s.size("timeout-ms"));
  e.retry.max_retries = static_cast<int>(s.size("retry-cap"));
  e.requests_per_second = s.real("requests-per-second");
  e.concurrency = static_cast<int>(std::max<std::size_t>(1, s.size("http-concurrency")));
  return e;
}

struct Backends {
  std::unique_ptr<ChatBackend> rule;
  std::unique_ptr<ChatBackend> scripted;
  std::unique_ptr<ChatBackend> http;
  ChatBackend* active = nullptr;
};

Backends make_backends(const Settings& s, const KnowledgeGraph& graph, std::ostream& err) {
  Backends b;
  const std::string kind = s.require("backend");
  std::vector<ScriptRule> rules;
  if (auto script = s.get("script"); script && !script->empty()) {
    std::ifstream in(*script);
    if (!in) throw UsageError("--script: cannot read " + *script);
    rules = ScriptedBackend::parse_rules(in);
  }
  if (kind == "rule") {
    b.rule = std::make_unique<RuleBasedBackend>(graph, s.real("noise"));
    b.active = b.rule.get();
    if (!rules.empty()) {
      b.scripted = std::make_unique<ScriptedBackend>(std::move(rules), b.rule.get());
      b.active = b.scripted.get();
    }
  } else if (kind == "scripted") {
    if (rules.empty()) throw UsageError("--backend scripted needs --script with at least one rule");
    b.scripted = std::make_unique<ScriptedBackend>(std::move(rules));
    b.active = b.scripted.get();
  } else if (kind == "http") {
    EndpointConfig e = endpoint_from(s);
    if (std::getenv(e.api_key_env.c_str()) == nullptr)
      err << "warning: " << e.api_key_env << " is not set; requests go out without a key\n";
    b.http = std::make_unique<HttpChatBackend>(std::move(e));
    b.active = b.http.get();
  } else {
    throw UsageError("--backend must be rule, scripted or http");
  }
  return b;
}

struct Linker {
  std::optional<Lexicon> lexicon;
  std::unique_ptr<MentionExtractor> extractor;
};

Linker make_linker(const Settings& s, const KnowledgeGraph& graph) {
  Linker l;
  if (auto cmd = s.get("ner-command"); cmd && !cmd->empty()) {
    l.extractor = std::make_unique<ProcessNerLinker>(*cmd);
  } else {
    l.lexicon = build_lexicon(graph);
    l.extractor = std::make_unique<DictionaryLinker>(*l.lexicon);
  }
  return l;
}

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05.2f", 100.0 * v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  text::write_file(path, content);
}

nlohmann::json input_entry(const std::string& path) {
  return {{"path", path}, {"git_blob_sha1", text::git_blob_hash(text::read_file(path))}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_index(const std::string& corpus, const std::string& out_path, bool stopwords,
              const std::string& format, std::ostream& out) {
  std::vector<Document> docs = load_corpus(corpus);
  LitIndex index = build_index(std::move(docs), TokenizerOptions{stopwords});
  index.save(fs::path(out_path));
  if (format == "json") {
    out << nlohmann::json{{"documents", index.size()},
                          {"terms", index.term_count()},
                          {"avg_dl", index.avg_dl()},
                          {"format_version", LitIndex::kFormatVersion}}
               .dump()
        << '\n';
  } else {
    out << "indexed " << index.size() << " documents, " << index.term_count() << " terms -> "
        << out_path << '\n';
  }
  return kExitOk;
}

int cmd_build_dataset(const std::string& kg_path, const std::string& aliases,
                      const std::string& out_path, const BuilderConfig& cfg,
                      const std::string& format, std::ostream& out) {
  LoadOptions opts;
  if (!aliases.empty()) opts.aliases = fs::path(aliases);
  KnowledgeGraph g = load_kg(kg_path, opts);
  std::vector<DatasetInstance> ds = build_dataset(g, cfg);
  save_dataset(out_path, ds);
  std::array<std::size_t, 3> counts{};
  for (const DatasetInstance& d : ds) ++counts[static_cast<std::size_t>(d.label)];
  if (format == "json") {
    nlohmann::json j = nlohmann::json::object();
    for (Label l : kAllLabels) j[std::string(to_string(l))] = counts[static_cast<std::size_t>(l)];
    out << nlohmann::json{{"instances", ds.size()}, {"classes", j}}.dump() << '\n';
  } else {
    for (Label l : kAllLabels)
      out << to_string(l) << '\t' << counts[static_cast<std::size_t>(l)] << '\n';
    out << "wrote " << ds.size() << " instances -> " << out_path << '\n';
  }
  return kExitOk;
}

int cmd_run(const FlagBindings& b, std::ostream& out, std::ostream& err) {
  Settings s = resolve_settings(b);

  PipelineConfig cfg;
  try {
    cfg.method = method_from_string(s.require("method"));
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const std::size_t sc = s.size("sc");
  if (sc > 0 && s.source("temperature") == Source::fallback) s.set("temperature", "0.7", Source::fallback);
  cfg.generation.temperature = s.real("temperature");
  cfg.generation.max_tokens = static_cast<int>(s.size("max-tokens"));
  cfg.generation.model = s.require("model");
  if (auto m = s.get("model-generator"); m && !m->empty()) cfg.generation.model = *m;
  cfg.verification.model = s.get("model-verifier").value_or(cfg.generation.model);
  if (cfg.verification.model.empty()) cfg.verification.model = cfg.generation.model;
  cfg.verification.max_tokens = cfg.generation.max_tokens;
  cfg.k = s.size("k");
  cfg.chain_limit = s.size("chain-limit");
  cfg.top_k = s.size("top-k");
  cfg.candidate_cap = s.size("candidate-cap");
  cfg.ablation = {s.flag("no-kg"), s.flag("no-literature"), s.flag("no-enrichment"),
                  s.flag("no-cot")};
  cfg.verify = !s.flag("no-verify");
  cfg.parallelism = static_cast<int>(s.size("concurrency"));
  cfg.base_seed = s.size("seed");

  if (sc > 1 && cfg.generation.greedy())
    throw UsageError("--sc " + std::to_string(sc) + " needs --temperature > 0");
  if (cfg.generation.temperature < 0) throw UsageError("--temperature must be >= 0");
  if (cfg.ablation.any() && cfg.method != Method::kgcoi)
    throw UsageError("ablation flags apply to --method kgcoi only");
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  require_file(s, "kg");
  require_file(s, "dataset");
  const std::string out_dir = s.require("out-dir");
  const bool retrieves = cfg.method == Method::rag ||
                         (cfg.method == Method::kgcoi && !cfg.ablation.no_literature);
  if (retrieves) {
    const bool has_index = s.get("index").value_or("") != "";
    const bool has_corpus = s.get("corpus").value_or("") != "";
    if (!has_index && !has_corpus)
      throw UsageError("--method " + std::string(to_string(cfg.method)) +
                       " needs --corpus or --index");
    require_file(s, has_index ? "index" : "corpus");
  }
  if (auto a = s.get("aliases"); a && !a->empty()) require_file(s, "aliases");
  if (auto sc_path = s.get("script"); sc_path && !sc_path->empty()) require_file(s, "script");

  KnowledgeGraph graph = load_graph(s);
  std::vector<DatasetInstance> dataset = load_dataset(s.require("dataset"));
  std::optional<LitIndex> index;
  if (retrieves) {
    if (auto p = s.get("index"); p && !p->empty()) {
      index = LitIndex::load(fs::path(*p));
    } else {
      index = build_index(load_corpus(s.require("corpus")));
    }
  }
  Backends backends = make_backends(s, graph, err);
  Linker linker = make_linker(s, graph);

  std::vector<Question> questions;
  questions.reserve(dataset.size());
  for (const DatasetInstance& d : dataset) questions.push_back(question_from(d));

  Resources res;
  res.graph = &graph;
  res.index = index ? &*index : nullptr;
  res.linker = linker.extractor.get();
  res.enricher = backends.active;
  res.generator = backends.active;
  res.verifier = backends.active;

  std::vector<AggregateRecord> records = run_benchmark(questions, res, cfg, sc);
  const bool greedy = sc == 0;

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::ostringstream results, transcripts, verification;
  write_results(results, records, graph, greedy);
  write_transcripts(transcripts, records);
  for (const AggregateRecord& a : records) {
    for (const RunRecord& r : a.runs) write_verification_log(verification, a.id, r.report, graph);
  }
  write_text(dir / "results.jsonl", results.str());
  write_text(dir / "transcripts.jsonl", transcripts.str());
  write_text(dir / "verification.jsonl", verification.str());

  std::vector<Prediction> preds;
  std::size_t failed = 0;
  std::size_t parse_failed = 0;
  for (const AggregateRecord& a : records) {
    Prediction p;
    p.id = a.id;
    p.label = a.voted;
    p.confidence = a.confidence;
    preds.push_back(p);
    failed += a.failed ? 1 : 0;
    for (const RunRecord& r : a.runs) parse_failed += r.parse_failed ? 1 : 0;
  }
  ScoreResult scored = score(preds, gold_from(dataset));

  nlohmann::json seeds = nlohmann::json::object();
  seeds["base_seed"] = cfg.base_seed;
  if (!greedy) {
    nlohmann::json per = nlohmann::json::object();
    for (const Question& q : questions) {
      nlohmann::json list = nlohmann::json::array();
      for (std::size_t i = 0; i < sc; ++i) list.push_back(derive_seed(cfg.base_seed, q.id, i));
      per[q.id] = list;
    }
    seeds["runs"] = per;
  }
  nlohmann::json inputs = nlohmann::json::object();
  for (const char* key : {"kg", "aliases", "dataset", "corpus", "index", "script"}) {
    if (auto p = s.get(key); p && !p->empty() && fs::exists(*p)) inputs[key] = input_entry(*p);
  }
  nlohmann::json manifest{{"schema_version", kResultsSchemaVersion},
                          {"command", "run"},
                          {"config", s.snapshot()},
                          {"seeds", seeds},
                          {"inputs", inputs},
                          {"outputs",
                           {{"results.jsonl", text::git_blob_hash(results.str())},
                            {"transcripts.jsonl", text::git_blob_hash(transcripts.str())},
                            {"verification.jsonl", text::git_blob_hash(verification.str())}}}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  nlohmann::json summary = to_json(scored);
  summary["method"] = to_string(cfg.method);
  summary["n_runs"] = greedy ? 1 : sc;
  summary["failed"] = failed;
  summary["parse_failed_runs"] = parse_failed;
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  if (b.format == "json") {
    out << summary.dump() << '\n';
  } else {
    out << "method      " << to_string(cfg.method) << (greedy ? " (greedy)" : "")
        << (greedy ? "" : " (self-consistency, N=" + std::to_string(sc) + ")") << '\n';
    out << render_report(scored);
    if (failed > 0 || parse_failed > 0)
      out << "\nflagged: " << failed << " failed instances, " << parse_failed
          << " unparsable answers\n";
    out << "results -> " << (dir / "results.jsonl").string() << '\n';
  }
  return kExitOk;
}

int cmd_score(const std::string& results, const std::string& dataset, const std::string& summary,
              const std::string& format, std::ostream& out) {
  std::vector<Prediction> preds = load_predictions(results);
  std::vector<DatasetInstance> ds = load_dataset(dataset);
  ScoreResult r = score(preds, gold_from(ds));
  nlohmann::json j = to_json(r);
  const std::string summary_path = summary.empty() ? results + ".score.json" : summary;
  write_text(summary_path, j.dump(2) + "\n");
  if (format == "json") {
    out << j.dump() << '\n';
  } else {
    out << render_report(r);
  }
  return kExitOk;
}

int cmd_sc_report(const std::vector<std::string>& results, const std::string& dataset,
                  const std::string& json_out, const std::string& format, std::ostream& out) {
  std::vector<GoldItem> gold = gold_from(load_dataset(dataset));
  std::vector<ScalingInput> inputs;
  for (const std::string& path : results) {
    ScalingInput in;
    in.predictions = load_predictions(path);
    if (!in.predictions.empty()) {
      in.method = in.predictions.front().method;
      in.n = in.predictions.front().n_runs;
      for (const Prediction& p : in.predictions) {
        if (p.method != in.method || p.n_runs != in.n)
          throw FormatError(path + " mixes methods or run counts");
      }
    }
    inputs.push_back(std::move(in));
  }
  std::vector<ScalingRow> rows = scaling_report(inputs, gold);
  nlohmann::json j = to_json(rows);
  if (!json_out.empty()) write_text(json_out, j.dump(2) + "\n");
  if (format == "json") {
    out << j.dump() << '\n';
  } else {
    out << render_scaling(rows);
  }
  return kExitOk;
}

int cmd_verify(const FlagBindings& b, std::ostream& out, std::ostream& err) {
  Settings s = resolve_settings(b);
  require_file(s, "kg");
  require_file(s, "dataset");
  require_file(s, "results");
  const std::string log_path = s.require("out");
  if (auto a = s.get("aliases"); a && !a->empty()) require_file(s, "aliases");

  KnowledgeGraph graph = load_graph(s);
  std::map<std::string, DatasetInstance> by_id;
  for (DatasetInstance& d : load_dataset(s.require("dataset"))) by_id.emplace(d.id, std::move(d));
  Backends backends = make_backends(s, graph, err);
  Linker linker = make_linker(s, graph);
  VerifierOptions opts;
  opts.candidate_cap = s.size("candidate-cap");
  opts.generation.model = s.get("model-verifier").value_or("");
  if (opts.generation.model.empty()) opts.generation.model = s.require("model");

  std::ifstream in(s.require("results"));
  std::ostringstream log;
  std::string line;
  std::size_t number = 0;
  std::size_t runs = 0;
  double total = 0.0;
  const GraphView base = graph.view();
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("results line " + std::to_string(number) + ": " + e.what());
    }
    const std::string id = j.at("id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw AlignmentError("results id '" + id + "' is not in the dataset");
    const GraphView view = base.mask(it->second.mask);
    std::vector<nlohmann::json> run_list;
    if (j.value("kind", std::string("run")) == "aggregate") {
      for (const auto& r : j.at("runs")) run_list.push_back(r);
    } else {
      run_list.push_back(j);
    }
    for (std::size_t r = 0; r < run_list.size(); ++r) {
      std::vector<std::string> steps = run_list[r].value("steps", std::vector<std::string>{});
      ConfidenceReport report = verify_chain(steps, view, *linker.extractor, *backends.active, opts);
      nlohmann::json verdicts = nlohmann::json::array();
      for (const StepVerdict& v : report.verdicts) verdicts.push_back(to_json(v, graph));
      log << nlohmann::json{{"id", id},
                            {"run", r},
                            {"confidence", report.confidence},
                            {"recorded_confidence", run_list[r].value("confidence", 0.0)},
                            {"steps", verdicts}}
                 .dump()
          << '\n';
      total += report.confidence;
      ++runs;
    }
  }
  write_text(log_path, log.str());
  const double mean = runs == 0 ? 0.0 : total / static_cast<double>(runs);
  if (b.format == "json") {
    out << nlohmann::json{{"runs", runs}, {"mean_confidence", mean}}.dump() << '\n';
  } else {
    out << "verified " << runs << " runs\nConfidence  " << format_pct(mean) << "\nlog -> "
        << log_path << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-grounded hypothesis generation toolkit", "kgcoi"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  // index
  std::string corpus, index_out, index_format = "text";
  bool stopwords = false;
  CLI::App* index = app.add_subcommand("index", "Build and save a BM25 index from a JSONL corpus");
  index->add_option("--corpus", corpus, "corpus JSONL")->required();
  index->add_option("--out", index_out, "index file to write")->required();
  index->add_flag("--stopwords", stopwords, "drop English stopwords");
  index->add_option("--format", index_format, "text | json")->check(CLI::IsMember({"text", "json"}));

  // build-dataset
  std::string ds_kg, ds_aliases, ds_out, ds_format = "text";
  BuilderConfig bcfg;
  CLI::App* build = app.add_subcommand("build-dataset", "Mint a balanced masked-edge dataset");
  build->add_option("--kg", ds_kg, "knowledge graph TSV")->required();
  build->add_option("--aliases", ds_aliases, "entity alias TSV");
  build->add_option("--out", ds_out, "dataset JSONL to write")->required();
  build->add_option("--per-class", bcfg.per_class, "instances per label")->capture_default_str();
  build->add_option("--seed", bcfg.seed, "sampling seed")->capture_default_str();
  build->add_option("--max-walk", bcfg.max_walk, "maximum walk length")->capture_default_str();
  build->add_option("--threshold", bcfg.threshold, "opposite-relation publication ratio")
      ->capture_default_str();
  build->add_option("--restart-budget", bcfg.restart_budget, "walk restarts before giving up")
      ->capture_default_str();
  build->add_option("--format", ds_format, "text | json")->check(CLI::IsMember({"text", "json"}));

  // run
  FlagBindings run_flags;
  CLI::App* run = app.add_subcommand("run", "Answer every dataset question with one method");
  register_settings(run, run_flags,
                    {"kg", "aliases", "corpus", "index", "dataset", "out-dir", "method", "backend",
                     "script", "noise", "sc", "temperature", "seed", "max-tokens", "k",
                     "chain-limit", "top-k", "candidate-cap", "no-kg", "no-literature",
                     "no-enrichment", "no-cot", "no-verify", "concurrency", "ner-command",
                     "base-url", "api-key-env", "model", "model-enricher", "model-generator",
                     "model-verifier", "timeout-ms", "retry-cap", "requests-per-second",
                     "http-concurrency"});

  // score
  std::string sc_results, sc_dataset, sc_summary, sc_format = "text";
  CLI::App* scorecmd = app.add_subcommand("score", "Score a results file against its dataset");
  scorecmd->add_option("--results", sc_results, "results JSONL")->required();
  scorecmd->add_option("--dataset", sc_dataset, "dataset JSONL")->required();
  scorecmd->add_option("--summary", sc_summary, "JSON summary path [<results>.score.json]");
  scorecmd->add_option("--format", sc_format, "text | json")->check(CLI::IsMember({"text", "json"}));

  // verify
  FlagBindings verify_flags;
  CLI::App* verify = app.add_subcommand("verify", "Re-verify the reasoning steps of a results file");
  register_settings(verify, verify_flags,
                    {"kg", "aliases", "dataset", "results", "out", "backend", "script", "noise",
                     "candidate-cap", "ner-command", "base-url", "api-key-env", "model",
                     "model-verifier", "timeout-ms", "retry-cap", "requests-per-second",
                     "http-concurrency"});

  // sc-report
  std::vector<std::string> rep_results;
  std::string rep_dataset, rep_json, rep_format = "text";
  CLI::App* report = app.add_subcommand("sc-report", "Metrics by method and number of runs");
  report->add_option("--results", rep_results, "results JSONL files")->required();
  report->add_option("--dataset", rep_dataset, "dataset JSONL")->required();
  report->add_option("--json", rep_json, "also write the table as JSON");
  report->add_option("--format", rep_format, "text | json")->check(CLI::IsMember({"text", "json"}));

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("kgcoi");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*index) return cmd_index(corpus, index_out, stopwords, index_format, out);
    if (*build) return cmd_build_dataset(ds_kg, ds_aliases, ds_out, bcfg, ds_format, out);
    if (*run) return cmd_run(run_flags, out, err);
    if (*scorecmd) return cmd_score(sc_results, sc_dataset, sc_summary, sc_format, out);
    if (*verify) return cmd_verify(verify_flags, out, err);
    if (*report) return cmd_sc_report(rep_results, rep_dataset, rep_json, rep_format, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace kgcoi
