#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace negforge {

/// One syntactic word of a CoNLL-U sentence.
struct Token {
  int index = 0;  // 1-based
  std::string surface;
  std::string upos;
  std::string deprel;
  int head = 0;  // 0 = root
  bool space_after = true;

  bool operator==(const Token&) const = default;
};

/// Inclusive range of 1-based token indices.
struct SpanRange {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool contains(int idx) const { return idx >= start && idx <= end; }
  bool overlaps(const SpanRange& o) const { return start <= o.end && o.start <= end; }

  auto operator<=>(const SpanRange&) const = default;
};

/// A dependency-parsed sentence. Immutable; the constructor validates that the
/// head links form a single-rooted tree.
class DepSentence {
 public:
  /// Throws ParseError (line 0) when the tokens do not form a valid tree.
  DepSentence(std::vector<Token> tokens, std::string sent_id, std::string raw_text = {});

  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  const Token& token(int idx) const;  // 1-based, throws InvalidArgument
  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  const std::string& sent_id() const noexcept { return sent_id_; }
  /// The `# text =` comment if present, otherwise the detokenized tokens.
  const std::string& raw_text() const noexcept { return raw_text_; }
  int root() const noexcept { return root_; }
  /// Dependents of idx in surface order (idx 0 yields the root).
  const std::vector<int>& children(int idx) const;

 private:
  std::vector<Token> tokens_;
  std::string sent_id_;
  std::string raw_text_;
  std::vector<std::vector<int>> children_;  // indexed 0..n
  int root_ = 0;
};

/// Parses CoNLL-U text. Multiword-token ranges and empty nodes are skipped.
/// Sentences without a `# sent_id` comment get ids "s1", "s2", ... by position.
std::vector<DepSentence> parse_conllu(std::string_view text);

/// Serializes a sentence back to a CoNLL-U block (terminated by a blank line).
std::string write_conllu(const DepSentence& sent);

/// idx plus everything it dominates, ascending.
std::vector<int> descendants(const DepSentence& sent, int idx);

/// Contiguous [min, max] cover of descendants(idx).
SpanRange subtree_span(const DepSentence& sent, int idx);

/// Renders surface text honoring space_after. Tokens in `exclude` are dropped;
/// each `insert` string is emitted at its span's start. Spans in `insert` must
/// be disjoint.
std::string render_text(const DepSentence& sent, const std::set<int>& exclude = {},
                        const std::map<SpanRange, std::string>& insert = {});

/// Surface text of the tokens inside `span`.
std::string span_text(const DepSentence& sent, const SpanRange& span);

}  // namespace negforge
