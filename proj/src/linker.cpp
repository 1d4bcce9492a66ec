#include "kgcoi/linker.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <mutex>

#include <json.hpp>

#include "kgcoi/errors.hpp"

namespace kgcoi {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<SpanToken> span_tokenize(std::string_view text) {
  std::vector<SpanToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    SpanToken tok;
    tok.start = i;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
      char c = text[i];
      tok.norm.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
      ++i;
    }
    tok.end = i;
    out.push_back(std::move(tok));
  }
  return out;
}

std::string normalize_surface(std::string_view text) {
  std::string out;
  for (const SpanToken& t : span_tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t.norm;
  }
  return out;
}

const EntityId* Lexicon::lookup(std::string_view normalized) const {
  auto it = entries_.find(std::string(normalized));
  return it == entries_.end() ? nullptr : &it->second;
}

Lexicon build_lexicon(const KnowledgeGraph& graph) {
  Lexicon lex;
  auto add = [&](std::string_view surface, const EntityId& id) {
    std::string norm = normalize_surface(surface);
    if (norm.empty()) return;
    auto [it, inserted] = lex.entries_.try_emplace(norm, id);
    if (inserted) {
      lex.max_tokens_ =
          std::max(lex.max_tokens_, static_cast<std::size_t>(std::count(norm.begin(), norm.end(), ' ') + 1));
      return;
    }
    if (it->second == id) return;
    if (id < it->second) {
      lex.collisions_.push_back({norm, id, it->second});
      it->second = id;
    } else {
      lex.collisions_.push_back({norm, it->second, id});
    }
  };
  for (const Entity& e : graph.entities()) {
    add(e.name, e.id);
    for (const std::string& alias : e.aliases) add(alias, e.id);
  }
  return lex;
}

std::vector<Mention> link(std::string_view text, const Lexicon& lex) {
  std::vector<Mention> out;
  const std::vector<SpanToken> tokens = span_tokenize(text);
  std::vector<std::string> candidates;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t max_len = std::min(lex.max_tokens(), tokens.size() - i);
    candidates.clear();
    std::string joined;
    for (std::size_t len = 1; len <= max_len; ++len) {
      if (len > 1) joined.push_back(' ');
      joined += tokens[i + len - 1].norm;
      candidates.push_back(joined);
    }
    std::size_t matched = 0;
    for (std::size_t len = max_len; len >= 1; --len) {
      if (const EntityId* id = lex.lookup(candidates[len - 1])) {
        const std::size_t start = tokens[i].start;
        const std::size_t end = tokens[i + len - 1].end;
        out.push_back(Mention{*id, std::string(text.substr(start, end - start)), start, end});
        matched = len;
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
  return out;
}

std::string format_ner_request(std::string_view text) {
  return nlohmann::json{{"text", std::string(text)}}.dump();
}

std::vector<Mention> parse_ner_response(std::string_view line, std::string_view text) {
  std::vector<Mention> out;
  try {
    auto j = nlohmann::json::parse(line);
    for (const auto& m : j.at("mentions")) {
      Mention mention{EntityId(m.at("entity_id").get<std::string>()),
                      m.at("surface").get<std::string>(), m.at("start").get<std::size_t>(),
                      m.at("end").get<std::size_t>()};
      if (mention.entity.empty()) throw ParseError("NER mention with empty entity_id");
      if (mention.start >= mention.end || mention.end > text.size())
        throw ParseError("NER mention span out of range");
      out.push_back(std::move(mention));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed NER response: ") + e.what());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Mention& a, const Mention& b) { return a.start < b.start; });
  std::vector<Mention> disjoint;
  for (Mention& m : out) {
    if (!disjoint.empty() && m.start < disjoint.back().end) continue;
    disjoint.push_back(std::move(m));
  }
  return disjoint;
}

struct ProcessNerLinker::Impl {
  pid_t pid = -1;
  FILE* to_child = nullptr;
  FILE* from_child = nullptr;
  std::mutex mu;
};

ProcessNerLinker::ProcessNerLinker(const std::string& command) : impl_(std::make_unique<Impl>()) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw IoError("pipe() failed for NER adapter");
  pid_t pid = fork();
  if (pid < 0) throw IoError("fork() failed for NER adapter");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  impl_->pid = pid;
  impl_->to_child = fdopen(in_pipe[1], "w");
  impl_->from_child = fdopen(out_pipe[0], "r");
  // A dead adapter must surface as an error, not kill the caller.
  signal(SIGPIPE, SIG_IGN);
}

ProcessNerLinker::~ProcessNerLinker() {
  if (impl_->to_child) fclose(impl_->to_child);
  if (impl_->from_child) fclose(impl_->from_child);
  if (impl_->pid > 0) {
    int status = 0;
    waitpid(impl_->pid, &status, 0);
  }
}

std::vector<Mention> ProcessNerLinker::extract(std::string_view text) const {
  std::lock_guard lock(impl_->mu);
  std::string request = format_ner_request(text) + "\n";
  if (std::fwrite(request.data(), 1, request.size(), impl_->to_child) != request.size() ||
      std::fflush(impl_->to_child) != 0) {
    throw IoError("NER adapter closed its input");
  }
  std::string line;
  int c;
  while ((c = std::fgetc(impl_->from_child)) != EOF && c != '\n') line.push_back(static_cast<char>(c));
  if (c == EOF && line.empty()) throw IoError("NER adapter exited without a response");
  return parse_ner_response(line, text);
}

}  // namespace kgcoi
