#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgcoi/graph.hpp"

namespace kgcoi {

struct Mention {
  EntityId entity;
  std::string surface;
  std::size_t start = 0;  // byte offset into the original text
  std::size_t end = 0;    // one past the last byte

  bool operator==(const Mention&) const = default;
};

/// Token with its byte span in the source text.
struct SpanToken {
  std::string norm;
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Lowercased alphanumeric tokens; punctuation and whitespace are boundaries.
std::vector<SpanToken> span_tokenize(std::string_view text);
/// Surface normal form: tokens joined by single spaces.
std::string normalize_surface(std::string_view text);

struct LexiconCollision {
  std::string surface;
  EntityId kept;
  EntityId dropped;
};

/// Normalized surface -> entity dictionary built from names and aliases.
class Lexicon {
public:
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t max_tokens() const noexcept { return max_tokens_; }
  const EntityId* lookup(std::string_view normalized) const;
  const std::vector<LexiconCollision>& collisions() const noexcept { return collisions_; }
  const std::unordered_map<std::string, EntityId>& entries() const noexcept { return entries_; }

private:
  friend Lexicon build_lexicon(const KnowledgeGraph& graph);

  std::unordered_map<std::string, EntityId> entries_;
  std::size_t max_tokens_ = 0;
  std::vector<LexiconCollision> collisions_;
};

/// A surface claimed by two entities goes to the smaller id; the loser is
/// recorded in collisions().
Lexicon build_lexicon(const KnowledgeGraph& graph);

/// Greedy left-to-right longest match over token spans.
std::vector<Mention> link(std::string_view text, const Lexicon& lex);

/// Anything that finds entity mentions in a claim.
class MentionExtractor {
public:
  virtual ~MentionExtractor() = default;
  virtual std::vector<Mention> extract(std::string_view text) const = 0;
};

class DictionaryLinker final : public MentionExtractor {
public:
  explicit DictionaryLinker(const Lexicon& lex) : lex_(&lex) {}
  std::vector<Mention> extract(std::string_view text) const override { return link(text, *lex_); }

private:
  const Lexicon* lex_;
};

// External NER over a process boundary. Each request is one JSON line
// {"text": "..."}; each response one JSON line
// {"mentions": [{"surface", "entity_id", "start", "end"}, ...]}.

std::string format_ner_request(std::string_view text);
/// Validates spans against the text and drops overlaps (earliest wins).
/// Throws ParseError on malformed lines or out-of-range spans.
std::vector<Mention> parse_ner_response(std::string_view line, std::string_view text);

/// Spawns `command` via /bin/sh and talks the line protocol above over its
/// stdin/stdout. Calls are serialized.
class ProcessNerLinker final : public MentionExtractor {
public:
  explicit ProcessNerLinker(const std::string& command);
  ~ProcessNerLinker() override;
  ProcessNerLinker(const ProcessNerLinker&) = delete;
  ProcessNerLinker& operator=(const ProcessNerLinker&) = delete;

  std::vector<Mention> extract(std::string_view text) const override;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kgcoi
