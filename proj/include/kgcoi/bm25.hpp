#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgcoi {

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
};

struct TokenizerOptions {
  bool remove_stopwords = false;
};

/// Lowercased maximal runs of ASCII letters and digits. Bytes outside ASCII
/// are kept inside tokens so UTF-8 words are not split apart.
std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options = {});

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;
};

struct SearchHit {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// ln((N - df + 0.5) / (df + 0.5) + 1); always positive for df <= N.
double bm25_idf(std::size_t n_docs, std::size_t df);

/// Frozen inverted index over title + " " + text of each document.
class LitIndex {
public:
  static constexpr int kFormatVersion = 1;

  LitIndex() = default;

  /// Throws IntegrityError on duplicate doc ids or documents with neither
  /// title nor text.
  static LitIndex build(std::vector<Document> docs, TokenizerOptions options = {});

  std::size_t size() const noexcept { return docs_.size(); }
  double avg_dl() const noexcept { return avg_dl_; }
  const TokenizerOptions& tokenizer() const noexcept { return options_; }
  std::span<const std::uint32_t> doc_lengths() const noexcept { return doc_lengths_; }
  const Document& document(std::uint32_t ordinal) const { return docs_.at(ordinal); }
  std::optional<std::uint32_t> find_doc(std::string_view doc_id) const;

  std::size_t term_count() const noexcept { return terms_.size(); }
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t df(std::string_view term) const { return postings(term).size(); }

  /// Top hits by BM25, best first, ties broken by doc id. Documents that
  /// share no term with the query are never returned.
  std::vector<SearchHit> search(std::string_view query, std::size_t top_k,
                                Bm25Params params = {}) const;

  /// Many queries at once, one query per OpenMP task.
  std::vector<std::vector<SearchHit>> search_batch(std::span<const std::string> queries,
                                                   std::size_t top_k,
                                                   Bm25Params params = {}) const;
  std::vector<std::vector<SearchHit>> search_batch_serial(std::span<const std::string> queries,
                                                          std::size_t top_k,
                                                          Bm25Params params = {}) const;

  void save(std::ostream& out) const;
  static LitIndex load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static LitIndex load(const std::filesystem::path& path);

private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::uint32_t> doc_ordinal_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_dl_ = 0.0;
  TokenizerOptions options_;
  std::unordered_map<std::string, std::uint32_t> term_id_;
  std::vector<std::string> terms_;
  std::vector<std::vector<Posting>> postings_;

  void finalize_stats();
};

inline LitIndex build_index(std::vector<Document> docs, TokenizerOptions options = {}) {
  return LitIndex::build(std::move(docs), options);
}
inline std::vector<SearchHit> search(const LitIndex& index, std::string_view query,
                                     std::size_t top_k) {
  return index.search(query, top_k);
}

/// JSON-lines corpus: one {"doc_id", "title", "text"} object per line.
std::vector<Document> parse_corpus(std::istream& in);
std::vector<Document> load_corpus(const std::filesystem::path& path);

}  // namespace kgcoi
