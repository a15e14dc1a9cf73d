#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "negforge/syntax.hpp"

namespace negforge {

/// Token-selection rules. R1 verbs/auxiliaries, R2 determiners, R3
/// subjects/objects, R4 adverbial modifiers, R5 adjectives, R6 prepositions.
/// Whole marks the entire-sentence mask.
enum class RuleId { R1 = 1, R2, R3, R4, R5, R6, Whole };

enum class Granularity { Token, Subtree };

std::string_view to_string(RuleId r);
std::string_view to_string(Granularity g);
RuleId parse_rule_id(std::string_view s);        // throws InvalidArgument
Granularity parse_granularity(std::string_view s);  // "token" | "subtree"

inline constexpr std::string_view kBlank = "[BLANK]";

struct MaskConfig {
  Granularity granularity = Granularity::Token;
  int max_blanks_per_proposal = 2;
  int max_proposals = 6;
  bool include_whole_sentence = true;
  std::set<RuleId> enabled_rules{RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5, RuleId::R6};
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct MaskedSpan {
  SpanRange range;
  RuleId rule;

  bool operator==(const MaskedSpan&) const = default;
};

struct MaskProposal {
  std::string sent_id;
  std::vector<MaskedSpan> spans;  // disjoint, surface order
  Granularity granularity = Granularity::Token;
  std::string masked_text;
  /// Some blank is followed only by punctuation; such prompts tend to degenerate.
  bool terminal_blank = false;

  bool is_whole() const { return spans.size() == 1 && spans.front().rule == RuleId::Whole; }
  bool operator==(const MaskProposal&) const = default;
};

struct RuleMatch {
  int index;
  RuleId rule;

  bool operator==(const RuleMatch&) const = default;
};

/// True when the rule's POS/deprel predicate holds on the token.
bool rule_holds(const Token& tok, RuleId rule);

/// All (token, rule) matches, ordered by rule then token index. R6 is only
/// reported at subtree granularity.
std::vector<RuleMatch> match_rules(const DepSentence& sent, Granularity granularity = Granularity::Subtree);

/// The span to blank out for a match; nullopt when the match is degenerate
/// (a determiner in sentence-final position at token granularity).
std::optional<SpanRange> expand_target(const DepSentence& sent, int idx, RuleId rule, Granularity granularity);

/// Builds masked proposals under the configured budget. The whole-sentence
/// proposal, when enabled, is appended on top of max_proposals.
std::vector<MaskProposal> propose_masks(const DepSentence& sent, const MaskConfig& cfg);

/// Renders the sentence with each span replaced by a single blank.
std::string masked_text(const DepSentence& sent, const std::vector<MaskedSpan>& spans);

}  // namespace negforge
