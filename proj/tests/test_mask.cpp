#include <gtest/gtest.h>

#include <random>
#include <set>

#include "negforge/error.hpp"
#include "negforge/mask.hpp"
#include "negforge/prompt.hpp"
#include "negforge/text.hpp"
#include "oracles.hpp"

using namespace negforge;

namespace {

std::vector<DepSentence> demo() { return parse_conllu(oracle::read_file(oracle::data_file("demo_corpus.conllu"))); }

DepSentence by_id(const std::vector<DepSentence>& all, const std::string& id) {
  for (const auto& s : all)
    if (s.sent_id() == id) return s;
  throw std::runtime_error("missing " + id);
}

std::string matches_string(const DepSentence& s, Granularity g) {
  std::vector<std::pair<int, int>> m;
  for (auto r : match_rules(s, g)) m.emplace_back(static_cast<int>(r.rule), r.index);
  return oracle::format_matches(m);
}

std::string reconstruct(const DepSentence& s, const MaskProposal& p) {
  std::vector<std::string> fills;
  for (const auto& span : p.spans) fills.push_back(span_text(s, span.range));
  const bool upper = !s.raw_text().empty() && is_ascii_upper(s.raw_text()[0]);
  return fill_blanks(p.masked_text, fills, upper);
}

}  // namespace

TEST(Rules, FixtureMatchesExactly) {
  auto sents = parse_conllu(oracle::read_file(oracle::fixture("rules12.conllu")));
  auto expected = oracle::read_rule_fixture(oracle::fixture("rules12.expected"));
  ASSERT_EQ(sents.size(), 12u);
  ASSERT_EQ(expected.size(), 12u);
  for (const auto& s : sents) EXPECT_EQ(matches_string(s, Granularity::Subtree), expected.at(s.sent_id())) << s.sent_id();
}

TEST(Rules, PrepositionsOnlyAtSubtreeGranularity) {
  const auto& s = by_id(demo(), "demo-10");  // She will meet us at the restaurant.
  EXPECT_EQ(matches_string(s, Granularity::Subtree), "R1:2,3 R2:6 R3:1,4 R6:5");
  EXPECT_EQ(matches_string(s, Granularity::Token), "R1:2,3 R2:6 R3:1,4");
}

TEST(Rules, TargetExpansion) {
  auto all = demo();
  const auto& s = by_id(all, "demo-10");
  EXPECT_EQ(*expand_target(s, 6, RuleId::R2, Granularity::Token), (SpanRange{6, 7}));
  EXPECT_EQ(*expand_target(s, 6, RuleId::R2, Granularity::Subtree), (SpanRange{5, 7}));
  EXPECT_EQ(*expand_target(s, 5, RuleId::R6, Granularity::Subtree), (SpanRange{5, 7}));
  EXPECT_EQ(*expand_target(s, 3, RuleId::Whole, Granularity::Token), (SpanRange{1, 8}));
  const auto& eat = by_id(all, "demo-08");  // She was eating an apple.
  EXPECT_EQ(*expand_target(eat, 5, RuleId::R3, Granularity::Subtree), (SpanRange{4, 5}));
  EXPECT_EQ(*expand_target(eat, 5, RuleId::R3, Granularity::Token), (SpanRange{5, 5}));
}

TEST(Rules, SentenceFinalDeterminerIsDegenerate) {
  std::vector<Token> toks{{1, "Take", "VERB", "root", 0, true}, {2, "this", "DET", "det", 1, true}};
  DepSentence s(toks, "x");
  EXPECT_FALSE(expand_target(s, 2, RuleId::R2, Granularity::Token).has_value());
}

TEST(Masks, CookingExample) {
  const auto& s = by_id(demo(), "demo-01");
  EXPECT_EQ(masked_text(s, {{{2, 2}, RuleId::R1}}), "They [BLANK] cooking dinner and serving it to their guests.");
  EXPECT_EQ(masked_text(s, {{{8, 10}, RuleId::R6}}), "They were cooking dinner and serving it [BLANK].");
  EXPECT_EQ(masked_text(s, {{{1, 11}, RuleId::Whole}}), "[BLANK]");
}

TEST(Masks, ProposalInvariants) {
  for (auto g : {Granularity::Token, Granularity::Subtree}) {
    for (const auto& s : demo()) {
      MaskConfig cfg;
      cfg.granularity = g;
      cfg.rng_seed = 11;
      auto props = propose_masks(s, cfg);
      ASSERT_FALSE(props.empty());
      EXPECT_LE(props.size(), static_cast<std::size_t>(cfg.max_proposals) + 1);
      EXPECT_TRUE(props.back().is_whole());
      std::set<std::string> texts;
      for (const auto& p : props) {
        EXPECT_TRUE(texts.insert(p.masked_text).second);
        EXPECT_EQ(p.sent_id, s.sent_id());
        EXPECT_LE(p.spans.size(), static_cast<std::size_t>(cfg.max_blanks_per_proposal));
        EXPECT_EQ(count_occurrences(p.masked_text, kBlank), p.spans.size());
        for (std::size_t i = 1; i < p.spans.size(); ++i) EXPECT_LT(p.spans[i - 1].range.end, p.spans[i].range.start);
        EXPECT_EQ(reconstruct(s, p), s.raw_text());
      }
      EXPECT_EQ(props, propose_masks(s, cfg));
    }
  }
}

TEST(Masks, RespectsConfig) {
  const auto& s = by_id(demo(), "demo-12");
  MaskConfig cfg;
  cfg.max_proposals = 2;
  cfg.max_blanks_per_proposal = 1;
  cfg.include_whole_sentence = false;
  cfg.enabled_rules = {RuleId::R5};
  auto props = propose_masks(s, cfg);
  ASSERT_EQ(props.size(), 1u);  // "happy" is the only adjective
  EXPECT_EQ(props[0].spans[0].rule, RuleId::R5);
  EXPECT_EQ(props[0].masked_text, "She is always [BLANK] to lend a helping hand to her friends.");

  cfg.enabled_rules = {RuleId::Whole};
  EXPECT_THROW(propose_masks(s, cfg), InvalidArgument);
  cfg.enabled_rules = {RuleId::R1};
  cfg.max_proposals = 0;
  EXPECT_THROW(propose_masks(s, cfg), InvalidArgument);
}

TEST(Masks, TerminalBlankFlag) {
  const auto& s = by_id(demo(), "demo-08");
  MaskConfig cfg;
  cfg.granularity = Granularity::Subtree;
  cfg.max_blanks_per_proposal = 1;
  for (const auto& p : propose_masks(s, cfg)) {
    if (p.is_whole()) {
      EXPECT_FALSE(p.terminal_blank);
    } else {
      EXPECT_EQ(p.terminal_blank, p.spans[0].range.end == 5) << p.masked_text;
    }
  }
}

TEST(Masks, FuzzedRoundTrip) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 300; ++i) {
    auto s = oracle::random_sentence(rng, "f" + std::to_string(i));
    for (auto g : {Granularity::Token, Granularity::Subtree}) {
      MaskConfig cfg;
      cfg.granularity = g;
      cfg.rng_seed = static_cast<std::uint64_t>(i);
      for (const auto& p : propose_masks(s, cfg)) ASSERT_EQ(reconstruct(s, p), s.raw_text()) << write_conllu(s);
    }
  }
}

TEST(Masks, NamesRoundTrip) {
  for (auto r : {RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5, RuleId::R6, RuleId::Whole})
    EXPECT_EQ(parse_rule_id(to_string(r)), r);
  EXPECT_EQ(parse_granularity("SUBTREE"), Granularity::Subtree);
  EXPECT_THROW(parse_rule_id("R7"), InvalidArgument);
  EXPECT_THROW(parse_granularity("phrase"), InvalidArgument);
}
