#include <gtest/gtest.h>

#include "negforge/error.hpp"
#include "negforge/prompt.hpp"

using namespace negforge;

TEST(Prompt, BuildAndSplit) {
  const std::string orig = "They were cooking dinner and serving it to their guests.";
  const std::string masked = "They [BLANK] cooking dinner and serving it to their guests.";
  auto p = build_prompt(orig, masked);
  EXPECT_EQ(p.text, orig + " <|perturb|> [negation] " + masked + " [SEP]");
  auto [o, m] = split_prompt(p);
  EXPECT_EQ(o, orig);
  EXPECT_EQ(m, masked);
  EXPECT_THROW(build_prompt(orig, orig), InvalidArgument);
  EXPECT_THROW(split_prompt(PromptString{"no markers here"}), InvalidArgument);
}

TEST(Prompt, NewlinesFlattened) {
  auto p = build_prompt("a\nb", "[BLANK]\nb");
  EXPECT_EQ(p.text.find('\n'), std::string::npos);
}

TEST(Prompt, CustomTokens) {
  SpecialTokens t;
  t.blank = "<mask>";
  t.sep = "<sep>";
  t.validate();
  auto p = build_prompt("x y", "x <mask>", t);
  EXPECT_EQ(split_prompt(p, t).second, "x <mask>");
  t.sep = "<mask>";
  EXPECT_THROW(t.validate(), InvalidArgument);
  t.sep = "[";
  EXPECT_THROW(t.validate(), InvalidArgument);  // contained in other markers
  t.sep = "";
  EXPECT_THROW(t.validate(), InvalidArgument);
}

TEST(Completion, ParsesAnswers) {
  auto c = parse_completion("weren't [ANSWER]", 1);
  ASSERT_TRUE(c.ok());
  EXPECT_EQ(c.answers, (std::vector<std::string>{"weren't"}));

  c = parse_completion(" no [ANSWER] [EMPTY] [ANSWER] <|endoftext|> junk [ANSWER]", 2);
  ASSERT_TRUE(c.ok());
  EXPECT_EQ(c.answers, (std::vector<std::string>{"no", ""}));

  c = parse_completion("never", 1);  // trailing marker is optional
  ASSERT_TRUE(c.ok());
  EXPECT_EQ(c.answers[0], "never");
}

TEST(Completion, Rejections) {
  EXPECT_EQ(parse_completion("a [ANSWER] b [ANSWER]", 1).reason, RejectReason::CountMismatch);
  EXPECT_EQ(parse_completion("a [ANSWER]", 2).reason, RejectReason::CountMismatch);
  EXPECT_EQ(parse_completion("   ", 1).reason, RejectReason::EmptyRaw);
  EXPECT_EQ(parse_completion("<|endoftext|>x", 1).reason, RejectReason::EmptyRaw);
  EXPECT_EQ(parse_completion("x [BLANK] y [ANSWER]", 1).reason, RejectReason::DegenerateSymbols);
  EXPECT_EQ(parse_completion("x [SEP] [ANSWER]", 1).reason, RejectReason::DegenerateSymbols);
}

TEST(Completion, DegenerateTableStrings) {
  const std::string symbols = "|> [|> [|> [|> [|> [|> [|> [|> [|> [|> [|>";
  const std::string repeat =
      " not a young woman.......... not a young woman.............. not a young woman........";
  EXPECT_EQ(parse_completion(symbols, 1).reason, RejectReason::DegenerateSymbols);
  EXPECT_EQ(parse_completion(repeat, 1).reason, RejectReason::DegenerateSymbols);
  EXPECT_EQ(parse_completion(repeat + " [ANSWER]", 1).reason, RejectReason::DegenerateSymbols);
}

TEST(Completion, OrdinaryAnswersAreNotDegenerate) {
  for (const char* s : {"weren't", "did not remain", "no one", "never ever", "not at all, not really", "café",
                        "well-known", "nobody nobody", "ha ha ha"}) {
    EXPECT_FALSE(is_degenerate_answer(s)) << s;
  }
  EXPECT_TRUE(is_degenerate_answer("?!?!?!?!"));
  EXPECT_TRUE(is_degenerate_answer("abcabcabcabcabc"));
}

TEST(Completion, FormatIsInverse) {
  const std::vector<std::vector<std::string>> cases{{"weren't"}, {"no", ""}, {"", "never", "not"}};
  for (const auto& answers : cases) {
    auto c = parse_completion(format_answers(answers), answers.size());
    ASSERT_TRUE(c.ok());
    EXPECT_EQ(c.answers, answers);
  }
}

TEST(Fill, ReplacesBlanks) {
  EXPECT_EQ(fill_blanks("They [BLANK] cooking.", {"weren't"}), "They weren't cooking.");
  EXPECT_EQ(fill_blanks("[BLANK] loves [BLANK].", {"nobody", "tea"}), "Nobody loves tea.");
  EXPECT_EQ(fill_blanks("[BLANK] loves tea.", {"nobody"}, false), "nobody loves tea.");
  EXPECT_EQ(fill_blanks("She [BLANK] eats.", {""}), "She eats.");
  EXPECT_EQ(fill_blanks("[BLANK] eats.", {""}), "eats.");
  EXPECT_THROW(fill_blanks("a [BLANK]", {"x", "y"}), InvalidArgument);
  EXPECT_EQ(fill_blanks("a <m>", {"x"}, true, "<m>"), "a x");
}
