#include "negforge/syntax.hpp"

#include <algorithm>
#include <charconv>

#include "negforge/error.hpp"
#include "negforge/text.hpp"

namespace negforge {

namespace {

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += t.surface;
    if (t.space_after) out += ' ';
  }
  return std::string(trim(out));
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool misc_has_no_space(std::string_view misc) {
  // Matches the UD "SpaceAfter=No" feature inside a |-separated MISC column.
  std::size_t pos = 0;
  while (pos <= misc.size()) {
    std::size_t bar = misc.find('|', pos);
    if (bar == std::string_view::npos) bar = misc.size();
    if (misc.substr(pos, bar - pos) == "SpaceAfter=No") return true;
    pos = bar + 1;
  }
  return false;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(pos));
      break;
    }
    cols.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return cols;
}

}  // namespace

DepSentence::DepSentence(std::vector<Token> tokens, std::string sent_id, std::string raw_text)
    : tokens_(std::move(tokens)), sent_id_(std::move(sent_id)), raw_text_(std::move(raw_text)) {
  const int n = size();
  if (n == 0) throw ParseError(sent_id_, 0, "empty sentence");
  children_.assign(n + 1, {});
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token& t = tokens_[i];
    if (t.index != i + 1) {
      throw ParseError(sent_id_, 0, "token ids must be contiguous from 1, got " + std::to_string(t.index));
    }
    if (t.head < 0 || t.head > n || t.head == t.index) {
      throw ParseError(sent_id_, 0, "invalid head " + std::to_string(t.head) + " for token " + std::to_string(t.index));
    }
    if (t.head == 0) {
      ++roots;
      root_ = t.index;
    }
    children_[t.head].push_back(t.index);
  }
  if (roots != 1) throw ParseError(sent_id_, 0, "expected exactly one root, found " + std::to_string(roots));
  // Every token must reach the root within n steps.
  for (const Token& t : tokens_) {
    int cur = t.index;
    int steps = 0;
    while (cur != 0) {
      cur = tokens_[cur - 1].head;
      if (++steps > n) {
        throw ParseError(sent_id_, 0, "cyclic head links through token " + std::to_string(t.index));
      }
    }
  }
  if (raw_text_.empty()) raw_text_ = detokenize(tokens_);
}

const Token& DepSentence::token(int idx) const {
  if (idx < 1 || idx > size()) throw InvalidArgument("token index out of range: " + std::to_string(idx));
  return tokens_[idx - 1];
}

const std::vector<int>& DepSentence::children(int idx) const {
  if (idx < 0 || idx > size()) throw InvalidArgument("token index out of range: " + std::to_string(idx));
  return children_[idx];
}

std::vector<DepSentence> parse_conllu(std::string_view text) {
  std::vector<DepSentence> out;
  std::vector<Token> tokens;
  std::string sent_id, raw;
  std::size_t block_line = 0;
  std::size_t line_no = 0;
  int pending_no_space_until = 0;  // last id of a multiword range marked SpaceAfter=No

  auto flush = [&]() {
    if (tokens.empty()) {
      sent_id.clear();
      raw.clear();
      return;
    }
    std::string id = sent_id.empty() ? "s" + std::to_string(out.size() + 1) : sent_id;
    try {
      out.emplace_back(std::move(tokens), id, raw);
    } catch (const ParseError& e) {
      // Re-anchor tree errors at the first line of the block.
      std::string msg = e.what();
      auto colon = msg.find(": ");
      throw ParseError(id, block_line, colon == std::string::npos ? msg : msg.substr(colon + 2));
    }
    tokens.clear();
    sent_id.clear();
    raw.clear();
    pending_no_space_until = 0;
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = nl + 1;

    if (trim(line).empty()) {
      flush();
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      std::string_view body = trim(line.substr(1));
      auto take = [&](std::string_view key, std::string& dst) {
        if (body.substr(0, key.size()) == key) {
          std::string_view rest = trim(body.substr(key.size()));
          if (!rest.empty() && rest.front() == '=') dst = std::string(trim(rest.substr(1)));
        }
      };
      take("sent_id", sent_id);
      take("text", raw);
      if (nl == text.size()) break;
      continue;
    }
    if (tokens.empty()) block_line = line_no;
    const std::string id_for_error = sent_id.empty() ? "s" + std::to_string(out.size() + 1) : sent_id;

    auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw ParseError(id_for_error, line_no, "expected 10 tab-separated columns, got " + std::to_string(cols.size()));
    }
    std::string_view id = cols[0];
    if (id.find('.') != std::string_view::npos) continue;  // empty node
    if (auto dash = id.find('-'); dash != std::string_view::npos) {
      int last = 0;
      if (parse_int(id.substr(dash + 1), last) && misc_has_no_space(cols[9])) pending_no_space_until = last;
      continue;
    }
    Token t;
    if (!parse_int(id, t.index)) throw ParseError(id_for_error, line_no, "non-integer token id '" + std::string(id) + "'");
    if (!parse_int(cols[6], t.head)) {
      throw ParseError(id_for_error, line_no, "non-integer head '" + std::string(cols[6]) + "'");
    }
    if (t.index != static_cast<int>(tokens.size()) + 1) {
      throw ParseError(id_for_error, line_no, "token id " + std::to_string(t.index) + " out of sequence");
    }
    t.surface = std::string(cols[1]);
    t.upos = std::string(cols[3]);
    t.deprel = std::string(cols[7]);
    t.space_after = !misc_has_no_space(cols[9]) && t.index != pending_no_space_until;
    tokens.push_back(std::move(t));
    if (nl == text.size()) break;
  }
  flush();
  return out;
}

std::string write_conllu(const DepSentence& sent) {
  std::string out = "# sent_id = " + sent.sent_id() + "\n# text = " + sent.raw_text() + "\n";
  for (const Token& t : sent.tokens()) {
    out += std::to_string(t.index) + '\t' + t.surface + "\t_\t" + t.upos + "\t_\t_\t" + std::to_string(t.head) + '\t' +
           t.deprel + "\t_\t" + (t.space_after ? "_" : "SpaceAfter=No") + '\n';
  }
  out += '\n';
  return out;
}

std::vector<int> descendants(const DepSentence& sent, int idx) {
  sent.token(idx);  // validates
  std::vector<int> out;
  std::vector<int> stack{idx};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (int c : sent.children(cur)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

SpanRange subtree_span(const DepSentence& sent, int idx) {
  auto d = descendants(sent, idx);
  return {d.front(), d.back()};
}

std::string render_text(const DepSentence& sent, const std::set<int>& exclude,
                        const std::map<SpanRange, std::string>& insert) {
  const int n = sent.size();
  const SpanRange* prev = nullptr;
  for (const auto& [span, _] : insert) {
    if (span.start < 1 || span.end > n || span.start > span.end) {
      throw InvalidArgument("insert span out of range");
    }
    if (prev && prev->overlaps(span)) throw InvalidArgument("overlapping insert spans");
    prev = &span;
  }
  std::string out;
  auto emit = [&](std::string_view piece, bool space_after) {
    out += piece;
    if (space_after) out += ' ';
  };
  auto it = insert.begin();
  for (const Token& t : sent.tokens()) {
    if (it != insert.end() && it->first.start == t.index) {
      emit(it->second, sent.token(it->first.end).space_after);
      ++it;
    }
    if (!exclude.count(t.index)) emit(t.surface, t.space_after);
  }
  return collapse_spaces(out);
}

std::string span_text(const DepSentence& sent, const SpanRange& span) {
  std::string out;
  for (int i = span.start; i <= span.end; ++i) {
    const Token& t = sent.token(i);
    out += t.surface;
    if (i != span.end && t.space_after) out += ' ';
  }
  return out;
}

}  // namespace negforge
