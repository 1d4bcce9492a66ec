#include "kgcoi/bm25.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "kgcoi/errors.hpp"
#include "kgcoi/text.hpp"

namespace kgcoi {

namespace {

constexpr std::array<std::string_view, 33> kStopwords = {
    "a",    "an",   "and",  "are", "as",   "at",   "be",    "by",   "for",  "from", "has",
    "have", "in",   "is",   "it",  "its",  "of",   "on",    "or",   "that", "the",  "their",
    "then", "there", "these", "they", "this", "to", "was", "were", "which", "will", "with"};

bool is_stopword(std::string_view term) {
  return std::find(kStopwords.begin(), kStopwords.end(), term) != kStopwords.end();
}

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (!(options.remove_stopwords && is_stopword(current))) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (!is_word_byte(c)) {
      flush();
      continue;
    }
    current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  flush();
  return out;
}

double bm25_idf(std::size_t n_docs, std::size_t df) {
  const double n = static_cast<double>(n_docs);
  const double d = static_cast<double>(df);
  return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

LitIndex LitIndex::build(std::vector<Document> docs, TokenizerOptions options) {
  LitIndex index;
  index.options_ = options;
  index.docs_ = std::move(docs);
  index.doc_lengths_.reserve(index.docs_.size());
  for (std::uint32_t ord = 0; ord < index.docs_.size(); ++ord) {
    const Document& d = index.docs_[ord];
    if (d.title.empty() && d.text.empty())
      throw IntegrityError("document '" + d.doc_id + "' has neither title nor text");
    if (!index.doc_ordinal_.emplace(d.doc_id, ord).second)
      throw IntegrityError("duplicate doc_id '" + d.doc_id + "'");

    std::vector<std::string> tokens = tokenize(d.title + " " + d.text, options);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    std::sort(tokens.begin(), tokens.end());
    for (std::size_t i = 0; i < tokens.size();) {
      std::size_t j = i;
      while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
      auto [it, inserted] =
          index.term_id_.try_emplace(tokens[i], static_cast<std::uint32_t>(index.terms_.size()));
      if (inserted) {
        index.terms_.push_back(tokens[i]);
        index.postings_.emplace_back();
      }
      // Documents are visited in ordinal order, so postings stay sorted.
      index.postings_[it->second].push_back(Posting{ord, static_cast<std::uint32_t>(j - i)});
      i = j;
    }
  }
  index.finalize_stats();
  return index;
}

void LitIndex::finalize_stats() {
  std::uint64_t total = 0;
  for (std::uint32_t len : doc_lengths_) total += len;
  avg_dl_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
}

std::optional<std::uint32_t> LitIndex::find_doc(std::string_view doc_id) const {
  auto it = doc_ordinal_.find(std::string(doc_id));
  if (it == doc_ordinal_.end()) return std::nullopt;
  return it->second;
}

std::span<const Posting> LitIndex::postings(std::string_view term) const {
  auto it = term_id_.find(std::string(term));
  if (it == term_id_.end()) return {};
  return postings_[it->second];
}

std::vector<SearchHit> LitIndex::search(std::string_view query, std::size_t top_k,
                                        Bm25Params params) const {
  if (top_k == 0) throw InvalidArgument("top_k must be positive");
  std::vector<SearchHit> hits;
  if (docs_.empty() || avg_dl_ <= 0.0) return hits;

  std::vector<double> acc(docs_.size(), 0.0);
  std::vector<std::uint32_t> touched;
  // Every query token contributes, so a repeated term counts twice.
  for (const std::string& term : tokenize(query, options_)) {
    std::span<const Posting> plist = postings(term);
    if (plist.empty()) continue;
    const double idf = bm25_idf(docs_.size(), plist.size());
    for (const Posting& p : plist) {
      const double tf = p.tf;
      const double norm = 1.0 - params.b + params.b * doc_lengths_[p.doc] / avg_dl_;
      if (acc[p.doc] == 0.0) touched.push_back(p.doc);
      acc[p.doc] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
    }
  }

  hits.reserve(touched.size());
  for (std::uint32_t d : touched) {
    if (acc[d] > 0.0) hits.push_back(SearchHit{docs_[d].doc_id, acc[d], 0});
  }
  auto better = [](const SearchHit& a, const SearchHit& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  };
  const std::size_t keep = std::min(top_k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    better);
  hits.resize(keep);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
  return hits;
}

std::vector<std::vector<SearchHit>> LitIndex::search_batch_serial(
    std::span<const std::string> queries, std::size_t top_k, Bm25Params params) const {
  std::vector<std::vector<SearchHit>> out;
  out.reserve(queries.size());
  for (const std::string& q : queries) out.push_back(search(q, top_k, params));
  return out;
}

std::vector<std::vector<SearchHit>> LitIndex::search_batch(std::span<const std::string> queries,
                                                           std::size_t top_k,
                                                           Bm25Params params) const {
  if (top_k == 0) throw InvalidArgument("top_k must be positive");
  std::vector<std::vector<SearchHit>> out(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = search(queries[static_cast<std::size_t>(i)], top_k, params);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence. Plain text, version 1:
//
//   kgcoi-bm25-index<TAB>1
//   stopwords<TAB>0|1
//   docs<TAB><N>
//   ["doc_id","title","text",length]        (N JSON lines, ordinal order)
//   terms<TAB><T>
//   term<TAB>df<TAB>doc:tf doc:tf ...        (T lines, terms sorted)
//   end

namespace {

constexpr std::string_view kMagic = "kgcoi-bm25-index";

[[noreturn]] void corrupt(const std::string& what) {
  throw FormatError("corrupted index (expected kgcoi-bm25-index version " +
                    std::to_string(LitIndex::kFormatVersion) + "): " + what);
}

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) corrupt(std::string("missing ") + what);
  return line;
}

std::uint64_t to_uint(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) corrupt(std::string("bad ") + what);
  return v;
}

std::uint64_t tagged_count(const std::string& line, std::string_view tag) {
  auto f = text::split(line, '\t');
  if (f.size() != 2 || f[0] != tag) corrupt("expected '" + std::string(tag) + "' line");
  return to_uint(f[1], "count");
}

}  // namespace

void LitIndex::save(std::ostream& out) const {
  out << kMagic << '\t' << kFormatVersion << '\n';
  out << "stopwords\t" << (options_.remove_stopwords ? 1 : 0) << '\n';
  out << "docs\t" << docs_.size() << '\n';
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    nlohmann::json row = nlohmann::json::array(
        {docs_[i].doc_id, docs_[i].title, docs_[i].text, doc_lengths_[i]});
    out << row.dump() << '\n';
  }
  std::vector<std::uint32_t> order(terms_.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return terms_[a] < terms_[b]; });
  out << "terms\t" << terms_.size() << '\n';
  for (std::uint32_t t : order) {
    out << terms_[t] << '\t' << postings_[t].size() << '\t';
    for (std::size_t i = 0; i < postings_[t].size(); ++i) {
      if (i > 0) out << ' ';
      out << postings_[t][i].doc << ':' << postings_[t][i].tf;
    }
    out << '\n';
  }
  out << "end\n";
}

LitIndex LitIndex::load(std::istream& in) {
  LitIndex index;
  {
    const std::string header = next_line(in, "header");
    auto f = text::split(header, '\t');
    if (f.size() != 2 || f[0] != kMagic) corrupt("bad header");
    if (f[1] != std::to_string(kFormatVersion)) {
      throw FormatError("index format version mismatch: expected version " +
                        std::to_string(kFormatVersion) + ", found " + std::string(f[1]));
    }
  }
  index.options_.remove_stopwords = tagged_count(next_line(in, "stopwords"), "stopwords") != 0;

  const std::uint64_t n_docs = tagged_count(next_line(in, "docs"), "docs");
  index.docs_.reserve(n_docs);
  for (std::uint64_t i = 0; i < n_docs; ++i) {
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(next_line(in, "document"));
      if (!row.is_array() || row.size() != 4) corrupt("bad document row");
      index.docs_.push_back(Document{row[0].get<std::string>(), row[1].get<std::string>(),
                                     row[2].get<std::string>()});
      index.doc_lengths_.push_back(row[3].get<std::uint32_t>());
    } catch (const nlohmann::json::exception&) {
      corrupt("bad document row " + std::to_string(i));
    }
    if (!index.doc_ordinal_.emplace(index.docs_.back().doc_id, static_cast<std::uint32_t>(i)).second)
      corrupt("duplicate doc_id");
  }

  const std::uint64_t n_terms = tagged_count(next_line(in, "terms"), "terms");
  std::vector<std::uint64_t> tf_sum(n_docs, 0);
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    std::string line = next_line(in, "term");
    auto f = text::split(line, '\t');
    if (f.size() != 3 || f[0].empty()) corrupt("bad term line");
    const std::uint64_t df = to_uint(f[1], "df");
    std::vector<Posting> plist;
    plist.reserve(df);
    for (std::string_view item : text::split(f[2], ' ')) {
      auto colon = item.find(':');
      if (colon == std::string_view::npos) corrupt("bad posting");
      Posting p{static_cast<std::uint32_t>(to_uint(item.substr(0, colon), "doc")),
                static_cast<std::uint32_t>(to_uint(item.substr(colon + 1), "tf"))};
      if (p.doc >= n_docs || p.tf == 0) corrupt("posting out of range");
      if (!plist.empty() && plist.back().doc >= p.doc) corrupt("postings not sorted");
      tf_sum[p.doc] += p.tf;
      plist.push_back(p);
    }
    if (plist.size() != df) corrupt("df does not match postings for '" + std::string(f[0]) + "'");
    if (!index.term_id_.emplace(std::string(f[0]), static_cast<std::uint32_t>(t)).second)
      corrupt("duplicate term");
    index.terms_.emplace_back(f[0]);
    index.postings_.push_back(std::move(plist));
  }
  if (next_line(in, "end marker") != "end") corrupt("missing end marker");
  for (std::uint64_t d = 0; d < n_docs; ++d) {
    if (tf_sum[d] != index.doc_lengths_[d]) corrupt("document length mismatch");
  }
  index.finalize_stats();
  return index;
}

void LitIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index " + path.string());
  save(out);
}

LitIndex LitIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index " + path.string());
  return load(in);
}

std::vector<Document> parse_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      docs.push_back(Document{j.at("doc_id").get<std::string>(), j.value("title", std::string()),
                              j.value("text", std::string())});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("corpus line " + std::to_string(number) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return parse_corpus(in);
}

}  // namespace kgcoi
