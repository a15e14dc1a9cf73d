#include "negforge/mask.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "negforge/error.hpp"
#include "negforge/text.hpp"

namespace negforge {

namespace {

constexpr std::array<RuleId, 6> kRuleOrder{RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5, RuleId::R6};

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

// Base relation without a UD subtype ("nsubj:pass" -> "nsubj").
std::string_view base_rel(std::string_view deprel) { return deprel.substr(0, deprel.find(':')); }

bool is_prep_rel(std::string_view deprel) {
  auto b = base_rel(deprel);
  return b == "prep" || b == "case";
}

bool is_punct(const Token& t) { return t.upos == "PUNCT"; }

bool adjacent_or_overlapping(const SpanRange& a, const SpanRange& b) {
  return a.overlaps(b) || a.end + 1 == b.start || b.end + 1 == a.start;
}

struct Candidate {
  SpanRange span;
  RuleId rule;
};

}  // namespace

std::string_view to_string(RuleId r) {
  switch (r) {
    case RuleId::R1: return "R1";
    case RuleId::R2: return "R2";
    case RuleId::R3: return "R3";
    case RuleId::R4: return "R4";
    case RuleId::R5: return "R5";
    case RuleId::R6: return "R6";
    case RuleId::Whole: return "WHOLE";
  }
  return "?";
}

std::string_view to_string(Granularity g) { return g == Granularity::Token ? "token" : "subtree"; }

RuleId parse_rule_id(std::string_view s) {
  for (RuleId r : kRuleOrder) {
    if (s == to_string(r)) return r;
  }
  if (s == "WHOLE") return RuleId::Whole;
  throw InvalidArgument("unknown rule id '" + std::string(s) + "'");
}

Granularity parse_granularity(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "token") return Granularity::Token;
  if (l == "subtree") return Granularity::Subtree;
  throw InvalidArgument("unknown granularity '" + std::string(s) + "'");
}

void MaskConfig::validate() const {
  if (max_blanks_per_proposal < 1) throw InvalidArgument("max_blanks_per_proposal must be >= 1");
  if (max_proposals < 1) throw InvalidArgument("max_proposals must be >= 1");
  if (enabled_rules.count(RuleId::Whole)) throw InvalidArgument("WHOLE is controlled by include_whole_sentence");
}

bool rule_holds(const Token& tok, RuleId rule) {
  const std::string_view rel = tok.deprel;
  switch (rule) {
    case RuleId::R1: return tok.upos == "VERB" || tok.upos == "AUX";
    case RuleId::R2: return tok.upos == "DET" && base_rel(rel) == "det";
    case RuleId::R3: return contains(rel, "subj") || contains(rel, "obj");
    case RuleId::R4: return tok.upos == "ADV" && base_rel(rel) == "advmod";
    case RuleId::R5: return tok.upos == "ADJ";
    case RuleId::R6: return tok.upos == "ADP" && is_prep_rel(rel);
    case RuleId::Whole: return true;
  }
  return false;
}

std::vector<RuleMatch> match_rules(const DepSentence& sent, Granularity granularity) {
  std::vector<RuleMatch> out;
  for (RuleId r : kRuleOrder) {
    if (r == RuleId::R6 && granularity != Granularity::Subtree) continue;
    for (const Token& t : sent.tokens()) {
      if (rule_holds(t, r)) out.push_back({t.index, r});
    }
  }
  return out;
}

std::optional<SpanRange> expand_target(const DepSentence& sent, int idx, RuleId rule, Granularity granularity) {
  const Token& tok = sent.token(idx);
  if (rule == RuleId::Whole) return SpanRange{1, sent.size()};
  if (granularity == Granularity::Token) {
    if (rule == RuleId::R2) {
      if (idx == sent.size()) return std::nullopt;
      return SpanRange{idx, idx + 1};
    }
    return SpanRange{idx, idx};
  }
  // Subtree: determiners and "case"-style prepositions are leaves that modify
  // a phrase head; blank the whole governed phrase.
  if (rule == RuleId::R2 || (rule == RuleId::R6 && base_rel(tok.deprel) == "case")) {
    if (tok.head != 0) return subtree_span(sent, tok.head);
  }
  return subtree_span(sent, idx);
}

std::string masked_text(const DepSentence& sent, const std::vector<MaskedSpan>& spans) {
  std::set<int> exclude;
  std::map<SpanRange, std::string> insert;
  for (const auto& s : spans) {
    for (int i = s.range.start; i <= s.range.end; ++i) exclude.insert(i);
    insert.emplace(s.range, std::string(kBlank));
  }
  return render_text(sent, exclude, insert);
}

std::vector<MaskProposal> propose_masks(const DepSentence& sent, const MaskConfig& cfg) {
  cfg.validate();
  const int n = sent.size();
  const SpanRange whole{1, n};

  // Candidate spans, first rule wins on identical spans.
  std::map<RuleId, std::vector<Candidate>> groups;
  std::set<SpanRange> seen;
  for (const RuleMatch& m : match_rules(sent, cfg.granularity)) {
    if (!cfg.enabled_rules.count(m.rule)) continue;
    auto span = expand_target(sent, m.index, m.rule, cfg.granularity);
    if (!span) continue;
    if (*span == whole && cfg.include_whole_sentence) continue;
    if (!seen.insert(*span).second) continue;
    groups[m.rule].push_back({*span, m.rule});
  }

  // Seeded shuffle inside each rule, then round-robin across rules so every
  // rule gets a blank before any rule gets a second one.
  std::vector<Candidate> order;
  {
    std::vector<std::vector<Candidate>*> lanes;
    for (RuleId r : kRuleOrder) {
      auto it = groups.find(r);
      if (it == groups.end()) continue;
      Rng rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(r)));
      rng.shuffle(it->second);
      lanes.push_back(&it->second);
    }
    for (std::size_t round = 0;; ++round) {
      bool any = false;
      for (auto* lane : lanes) {
        if (round < lane->size()) {
          order.push_back((*lane)[round]);
          any = true;
        }
      }
      if (!any) break;
    }
  }

  std::vector<MaskProposal> out;
  std::set<std::string> texts;
  auto emit = [&](std::vector<MaskedSpan> spans) {
    std::sort(spans.begin(), spans.end(),
              [](const MaskedSpan& a, const MaskedSpan& b) { return a.range.start < b.range.start; });
    MaskProposal p;
    p.sent_id = sent.sent_id();
    p.granularity = cfg.granularity;
    p.masked_text = masked_text(sent, spans);
    for (const auto& s : spans) {
      bool only_punct_after = true;
      for (int i = s.range.end + 1; i <= n && only_punct_after; ++i) only_punct_after = is_punct(sent.token(i));
      if (only_punct_after && s.rule != RuleId::Whole) p.terminal_blank = true;
    }
    p.spans = std::move(spans);
    if (!texts.insert(p.masked_text).second) return;
    out.push_back(std::move(p));
  };

  const auto budget = static_cast<std::size_t>(cfg.max_proposals);
  const auto max_blanks = static_cast<std::size_t>(cfg.max_blanks_per_proposal);

  // Picks up to `want` partners for order[k], preferring other rules and
  // spans that are not directly adjacent (adjacent blanks are ambiguous).
  auto partners = [&](std::size_t k, std::size_t want) {
    std::vector<MaskedSpan> chosen{{order[k].span, order[k].rule}};
    for (int pass = 0; pass < 3 && chosen.size() <= want; ++pass) {
      for (std::size_t step = 1; step < order.size() && chosen.size() <= want; ++step) {
        const Candidate& c = order[(k + step) % order.size()];
        bool ok = true;
        for (const auto& s : chosen) {
          if (pass < 2 && adjacent_or_overlapping(s.range, c.span)) ok = false;
          if (pass == 2 && s.range.overlaps(c.span)) ok = false;
          if (pass == 0 && s.rule == c.rule) ok = false;
          if (s.range == c.span) ok = false;
        }
        if (ok) chosen.push_back({c.span, c.rule});
      }
    }
    return chosen;
  };

  for (std::size_t k = 0; k < order.size() && out.size() < budget; ++k) {
    const bool multi = max_blanks >= 2 && out.size() % 2 == 1;
    if (multi) {
      emit(partners(k, max_blanks - 1));
    } else {
      emit({{order[k].span, order[k].rule}});
    }
  }
  // Budget left over: fill with combinations of disjoint spans.
  if (max_blanks >= 2) {
    for (std::size_t i = 0; i < order.size() && out.size() < budget; ++i) {
      for (std::size_t j = i + 1; j < order.size() && out.size() < budget; ++j) {
        if (order[i].span.overlaps(order[j].span)) continue;
        emit({{order[i].span, order[i].rule}, {order[j].span, order[j].rule}});
      }
    }
  }
  if (cfg.include_whole_sentence) {
    emit({{whole, RuleId::Whole}});
  }
  return out;
}

}  // namespace negforge
