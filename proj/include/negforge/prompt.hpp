#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace negforge {

/// Marker strings of the fill-in-the-blank prompt format. All configurable so
/// a differently tuned generator can be matched.
struct SpecialTokens {
  std::string blank = "[BLANK]";
  std::string sep = "[SEP]";
  std::string answer = "[ANSWER]";
  std::string empty = "[EMPTY]";
  std::string perturb = "<|perturb|>";
  std::string neg_code = "[negation]";
  std::string eos = "<|endoftext|>";

  /// Throws InvalidArgument unless the markers are non-empty, pairwise
  /// distinct, and none contains another.
  void validate() const;
};

/// "{original} {perturb} {neg_code} {masked} {sep}".
struct PromptString {
  std::string text;

  bool operator==(const PromptString&) const = default;
};

std::size_t count_occurrences(std::string_view hay, std::string_view needle);

PromptString build_prompt(std::string_view original, std::string_view masked, const SpecialTokens& toks = {});

/// Recovers (original, masked) from a prompt; throws InvalidArgument when the
/// prompt does not have the expected shape.
std::pair<std::string, std::string> split_prompt(const PromptString& prompt, const SpecialTokens& toks = {});

enum class RejectReason { None, CountMismatch, DegenerateSymbols, EmptyRaw };
std::string_view to_string(RejectReason r);

struct CompletionParse {
  std::vector<std::string> answers;
  RejectReason reason = RejectReason::None;

  bool ok() const { return reason == RejectReason::None; }
};

/// Symbol-run or tandem-repeat garbage, as produced by degenerate decoding.
bool is_degenerate_answer(std::string_view answer);

/// Splits a raw completion into one answer per blank. Rejections are values.
CompletionParse parse_completion(std::string_view raw, std::size_t blank_count, const SpecialTokens& toks = {});

/// Inverse of parse_completion for answer lists without special tokens.
std::string format_answers(const std::vector<std::string>& answers, const SpecialTokens& toks = {});

/// Replaces the i-th blank with answers[i]. Empty answers remove the blank
/// together with one neighbouring space. When the first blank opens the
/// sentence and `restore_initial_capital` is set, its fill is capitalized.
std::string fill_blanks(std::string_view masked, const std::vector<std::string>& answers,
                        bool restore_initial_capital = true, std::string_view blank = "[BLANK]");

struct GenerationCandidate {
  std::vector<std::string> answers;
  std::string filled;
  /// Some fill is more than 3x longer than the span it replaces.
  bool runaway = false;
};

struct CompletionReject {
  std::string raw;
  RejectReason reason;
};

struct GenerationRecord {
  PromptString prompt;
  std::vector<std::string> raw_completions;
  std::vector<GenerationCandidate> candidates;
  std::vector<CompletionReject> rejects;
};

}  // namespace negforge
