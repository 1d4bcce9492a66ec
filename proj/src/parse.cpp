#include "kgcoi/parse.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include "kgcoi/errors.hpp"
#include "kgcoi/text.hpp"

namespace kgcoi {

namespace {

// Case-insensitive search for the last occurrence of needle in hay.
std::size_t rfind_ci(std::string_view hay, std::string_view needle,
                     std::size_t from = std::string_view::npos) {
  if (hay.size() < needle.size()) return std::string_view::npos;
  std::size_t pos = std::min(from, hay.size() - needle.size());
  while (true) {
    if (text::iequals(hay.substr(pos, needle.size()), needle)) return pos;
    if (pos == 0) return std::string_view::npos;
    --pos;
  }
}

std::size_t find_ci(std::string_view hay, std::string_view needle) {
  for (std::size_t pos = 0; pos + needle.size() <= hay.size(); ++pos) {
    if (text::iequals(hay.substr(pos, needle.size()), needle)) return pos;
  }
  return std::string_view::npos;
}

// Removes ASCII and typographic quote marks plus markdown emphasis.
std::string strip_quotes(std::string_view s) {
  static constexpr std::array<std::string_view, 4> kCurly = {"\xE2\x80\x98", "\xE2\x80\x99",
                                                             "\xE2\x80\x9C", "\xE2\x80\x9D"};
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    bool curly = false;
    for (std::string_view q : kCurly) {
      if (s.substr(i, q.size()) == q) {
        i += q.size();
        curly = true;
        break;
      }
    }
    if (curly) continue;
    char c = s[i++];
    if (c == '\'' || c == '"' || c == '`' || c == '*') continue;
    out.push_back(c);
  }
  return out;
}

// Normalized text of the final "Answer:" payload, e.g. "no_relation".
std::optional<std::string> answer_payload(std::string_view raw) {
  std::size_t at = rfind_ci(raw, "answer:");
  if (at == std::string_view::npos) return std::nullopt;
  std::string_view rest = raw.substr(at + 7);
  rest = rest.substr(0, rest.find('\n'));
  std::string payload = strip_quotes(rest);
  std::string_view view = text::trim(payload);
  if (!view.empty() && view.front() == '[') {
    std::size_t close = view.find(']');
    view = view.substr(1, close == std::string_view::npos ? std::string_view::npos : close - 1);
  }
  std::string norm = text::to_lower(text::collapse_whitespace(view));
  for (char& c : norm) {
    if (c == ' ' || c == '-') c = '_';
  }
  while (!norm.empty() && (norm.back() == '.' || norm.back() == ',' || norm.back() == ';' ||
                           norm.back() == ':' || norm.back() == '!' || norm.back() == '_'))
    norm.pop_back();
  return norm;
}

// Exact match or a match followed by a non-word character.
bool starts_with_word(std::string_view s, std::string_view word) {
  if (s.substr(0, word.size()) != word) return false;
  if (s.size() == word.size()) return true;
  auto c = static_cast<unsigned char>(s[word.size()]);
  return !std::isalnum(c);
}

}  // namespace

Label parse_answer(std::string_view raw) {
  if (auto payload = answer_payload(raw)) {
    // Longest spelling first so "no_relation" wins over a bare "no".
    for (Label l : {Label::no_relation, Label::stimulate, Label::inhibit}) {
      if (starts_with_word(*payload, to_string(l))) return l;
    }
  }
  throw ParseError("no recognizable answer in completion: " + std::string(raw));
}

bool parse_verdict(std::string_view raw) {
  if (auto payload = answer_payload(raw)) {
    if (starts_with_word(*payload, "yes")) return true;
    if (starts_with_word(*payload, "no")) return false;
  }
  throw ParseError("no yes/no verdict in completion: " + std::string(raw));
}

std::vector<std::string> parse_reasoning(std::string_view raw) {
  std::vector<std::string> steps;
  std::size_t start = find_ci(raw, "reasoning:");
  if (start == std::string_view::npos) return steps;
  std::string_view body = raw.substr(start + 10);
  std::size_t answer = rfind_ci(body, "answer:");
  if (answer != std::string_view::npos) body = body.substr(0, answer);

  auto push = [&](std::string_view piece) {
    std::string step = text::collapse_whitespace(piece);
    if (!step.empty()) steps.push_back(std::move(step));
  };

  if (body.find(" | ") != std::string_view::npos) {
    std::size_t pos = 0;
    while (true) {
      std::size_t sep = body.find(" | ", pos);
      push(body.substr(pos, sep == std::string_view::npos ? std::string_view::npos : sep - pos));
      if (sep == std::string_view::npos) break;
      pos = sep + 3;
    }
    return steps;
  }

  std::size_t begin = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if ((c == '.' || c == '?' || c == '!') && i + 1 < body.size() &&
        std::isspace(static_cast<unsigned char>(body[i + 1]))) {
      push(body.substr(begin, i + 1 - begin));
      begin = i + 1;
    }
  }
  push(body.substr(begin));
  return steps;
}

std::string parse_keywords(std::string_view raw) {
  std::string_view s = text::trim(raw);
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (std::string_view label : {"search query:", "keywords:", "query:"}) {
      if (text::istarts_with(s, label)) {
        s = text::trim(s.substr(label.size()));
        stripped = true;
      }
    }
  }
  auto is_quote = [](char c) { return c == '"' || c == '\'' || c == '`'; };
  while (!s.empty() && is_quote(s.front())) s = text::trim(s.substr(1));
  while (!s.empty() && is_quote(s.back())) s = text::trim(s.substr(0, s.size() - 1));
  std::string query = text::collapse_whitespace(s);
  if (query.empty()) throw ParseError("empty keyword query in completion: " + std::string(raw));
  return query;
}

}  // namespace kgcoi
