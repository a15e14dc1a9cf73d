#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "negforge/error.hpp"
#include "negforge/filter.hpp"
#include "oracles.hpp"

using namespace negforge;

namespace {

std::set<std::string> classes_of(std::string_view s, const CueDetector& d) {
  std::set<std::string> out;
  for (const auto& c : d.detect(s)) out.insert(c.cue_text + "/" + std::string(to_string(c.cue_class)));
  return out;
}

std::vector<std::string> table7_candidates() {
  auto rec = nlohmann::json::parse(oracle::read_file(oracle::fixture("table7.jsonl")));
  return rec["candidates"].get<std::vector<std::string>>();
}

std::set<std::string> table7_expected() {
  std::set<std::string> out;
  std::istringstream in(oracle::read_file(oracle::fixture("table7_filtered.txt")));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.insert(normalize(line));
  return out;
}

const std::string kTable7Original = "They remained loyal to their cause despite the challenges.";

}  // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("  They Weren't cooking.  "), "they weren't cooking");
  EXPECT_EQ(normalize("Stop!?!"), "stop");
  EXPECT_EQ(normalize("Not remained loyal.."), "not remained loyal");
  EXPECT_EQ(normalize("...."), "");
  EXPECT_EQ(normalize("a, b"), "a, b");
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("kitten", "sitting", DistanceUnit::Char), 3u);
  EXPECT_EQ(levenshtein("they were cooking", "they weren't cooking", DistanceUnit::Token), 1u);
  EXPECT_NEAR(norm_levenshtein("they were cooking", "they weren't cooking"), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(norm_levenshtein("", ""), 0.0);
  EXPECT_EQ(norm_levenshtein("", "a b", DistanceUnit::Token), 1.0);
  EXPECT_EQ(levenshtein("café", "cafe", DistanceUnit::Char), 1u);
  EXPECT_EQ(parse_distance_unit("CHAR"), DistanceUnit::Char);
  EXPECT_THROW(parse_distance_unit("word"), InvalidArgument);
}

TEST(Levenshtein, AgreesWithOracle) {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abc";
  for (int i = 0; i < 2000; ++i) {
    std::string a, b;
    for (int k = static_cast<int>(rng() % 9); k > 0; --k) a += alphabet[rng() % 3];
    for (int k = static_cast<int>(rng() % 9); k > 0; --k) b += alphabet[rng() % 3];
    const auto want = oracle::edit_distance(std::vector<char>(a.begin(), a.end()), std::vector<char>(b.begin(), b.end()));
    ASSERT_EQ(levenshtein(a, b, DistanceUnit::Char), want) << a << " / " << b;
    ASSERT_EQ(levenshtein(a, b, DistanceUnit::Char), levenshtein(b, a, DistanceUnit::Char));
  }
}

TEST(Levenshtein, MetricProperties) {
  std::mt19937_64 rng(9);
  auto word = [&] {
    std::string s;
    for (int k = static_cast<int>(rng() % 6); k > 0; --k) s += "ab"[rng() % 2];
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    auto a = word(), b = word(), c = word();
    const auto ab = levenshtein(a, b, DistanceUnit::Char), bc = levenshtein(b, c, DistanceUnit::Char),
               ac = levenshtein(a, c, DistanceUnit::Char);
    EXPECT_LE(ac, ab + bc);
    EXPECT_EQ(ab == 0, a == b);
    const double n = norm_levenshtein(a, b, DistanceUnit::Char);
    EXPECT_GE(n, 0.0);
    EXPECT_LE(n, 1.0);
  }
}

TEST(Cues, LexiconClasses) {
  LexiconCueDetector d;
  EXPECT_TRUE(d.detect("The sun is up").empty());
  EXPECT_EQ(classes_of("They weren't cooking", d), (std::set<std::string>{"weren't/VERBAL"}));
  EXPECT_EQ(classes_of("She is never happy", d), (std::set<std::string>{"never/NONVERBAL"}));
  EXPECT_EQ(classes_of("The water was impure", d), (std::set<std::string>{"impure/AFFIXAL"}));
  EXPECT_EQ(classes_of("The bridge looks unsafe", d), (std::set<std::string>{"unsafe/AFFIXAL"}));
  EXPECT_EQ(classes_of("The car is un desirable", d), (std::set<std::string>{"un desirable/AFFIXAL"}));
  EXPECT_EQ(classes_of("No one came", d), (std::set<std::string>{"No one/MULTIWORD"}));
  EXPECT_EQ(classes_of("It is not only red", d), (std::set<std::string>{}));
  EXPECT_EQ(classes_of("He shouldn’t go", d), (std::set<std::string>{"shouldn’t/VERBAL"}));
}

TEST(Cues, ExcludedLookalikes) {
  LexiconCueDetector d;
  for (const char* s : {"They understand the universe", "Interest in the district is important",
                        "Unless it is united", "The display was impressive", "Nevertheless they stayed"}) {
    EXPECT_TRUE(d.detect(s).empty()) << s;
  }
}

TEST(Cues, OptionalMultiword) {
  const std::string s = "They showed a lack of loyalty";
  EXPECT_TRUE(LexiconCueDetector().detect(s).empty());
  auto cues = LexiconCueDetector(CueLexicon::bundled(), true).detect(s);
  ASSERT_EQ(cues.size(), 1u);
  EXPECT_EQ(cues[0].cue_text, "lack of");
  EXPECT_EQ(s.substr(cues[0].start, cues[0].end - cues[0].start), "lack of");
}

TEST(Cues, OffsetsPointIntoSentence) {
  const std::string s = "\"Nobody\" wasn't there, and it's unfair.";
  for (const auto& c : detect_cues(s)) EXPECT_EQ(s.substr(c.start, c.end - c.start), c.cue_text);
  EXPECT_EQ(detect_cues(s).size(), 3u);
}

TEST(Cues, CustomLexicon) {
  auto lex = CueLexicon::parse("VERBAL\tnope\nMULTIWORD\tby no means\n# c\n", "");
  LexiconCueDetector d(lex);
  EXPECT_EQ(classes_of("Nope, by no means", d), (std::set<std::string>{"Nope/VERBAL", "by no means/MULTIWORD"}));
  EXPECT_THROW(CueLexicon::parse("BOGUS\tx\n", ""), InvalidArgument);
  EXPECT_THROW(CueLexicon::parse("VERBAL\n", ""), InvalidArgument);
}

TEST(Filter, Table7ExactSet) {
  FilterConfig cfg;
  auto out = filter_candidates(kTable7Original, table7_candidates(), cfg);
  std::set<std::string> kept;
  for (const auto& k : out.kept) kept.insert(normalize(k.text));
  EXPECT_EQ(kept, table7_expected());
  EXPECT_EQ(out.kept.size() + out.rejected.size(), table7_candidates().size());
  std::map<FilterReason, int> reasons;
  for (const auto& r : out.rejected) ++reasons[r.reason];
  EXPECT_EQ(reasons[FilterReason::SampledOut], 0);
  EXPECT_EQ(reasons[FilterReason::TooFar], 0);
}

TEST(Filter, Table7WithLackOfEnabled) {
  FilterConfig cfg;
  cfg.enable_optional_cues = true;
  auto out = filter_candidates(kTable7Original, table7_candidates(), cfg);
  // Two distinct "lack of" variants join the pool of ten; epsilon still caps it.
  auto expected = table7_expected();
  std::set<std::string> kept;
  for (const auto& k : out.kept) {
    EXPECT_TRUE(kept.insert(normalize(k.text)).second);
    if (!expected.count(normalize(k.text))) EXPECT_NE(normalize(k.text).find("lack of"), std::string::npos) << k.text;
  }
  EXPECT_EQ(kept.size(), 10u);
  cfg.epsilon = 100;
  EXPECT_EQ(filter_candidates(kTable7Original, table7_candidates(), cfg).kept.size(), 12u);
}

TEST(Filter, ReasonsAndOrder) {
  FilterConfig cfg;
  const std::vector<std::string> cands{"", "They weren't cooking.", "they weren't cooking", "They were cooking.",
                                       "Nobody at all would ever have been cooking anything tonight."};
  auto out = filter_candidates("They were cooking.", cands, cfg);
  ASSERT_EQ(out.kept.size(), 1u);
  EXPECT_EQ(out.kept[0].text, "They weren't cooking.");
  EXPECT_EQ(out.kept[0].candidate, 1u);
  ASSERT_EQ(out.rejected.size(), 4u);
  EXPECT_EQ(out.rejected[0].reason, FilterReason::Empty);
  EXPECT_EQ(out.rejected[1].reason, FilterReason::Duplicate);
  EXPECT_EQ(out.rejected[2].reason, FilterReason::NoCue);
  EXPECT_EQ(out.rejected[3].reason, FilterReason::TooFar);
}

TEST(Filter, EpsilonSamplesWithoutReplacement) {
  const auto cands = table7_candidates();
  for (int eps : {1, 3, 10, 50}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      FilterConfig cfg;
      cfg.epsilon = eps;
      cfg.rng_seed = seed;
      auto out = filter_candidates(kTable7Original, cands, cfg);
      EXPECT_EQ(out.kept.size(), std::min<std::size_t>(eps, 10));
      auto expected = table7_expected();
      for (const auto& k : out.kept) EXPECT_TRUE(expected.count(normalize(k.text)));
      for (std::size_t i = 1; i < out.kept.size(); ++i) EXPECT_LT(out.kept[i - 1].candidate, out.kept[i].candidate);
      auto again = filter_candidates(kTable7Original, cands, cfg);
      ASSERT_EQ(again.kept.size(), out.kept.size());
      for (std::size_t i = 0; i < out.kept.size(); ++i) EXPECT_EQ(again.kept[i].candidate, out.kept[i].candidate);
    }
  }
}

TEST(Filter, LargerThresholdNeverShrinksPool) {
  const auto cands = table7_candidates();
  std::size_t prev = 0;
  for (double b : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0}) {
    FilterConfig cfg;
    cfg.epsilon = 1000;
    cfg.threshold = b;
    auto out = filter_candidates(kTable7Original, cands, cfg);
    EXPECT_GE(out.kept.size(), prev) << b;
    prev = out.kept.size();
    for (const auto& k : out.kept) {
      EXPECT_LT(norm_levenshtein(normalize(k.text), normalize(kTable7Original)), b);
      EXPECT_FALSE(k.cues.empty());
    }
  }
}

TEST(Filter, ConfigValidation) {
  FilterConfig cfg;
  cfg.epsilon = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.epsilon = 1;
  cfg.threshold = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.epsilon = 1;
  cfg.threshold = -0.1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.threshold = 0.5;
  cfg.cue_lexicon_path = "/nonexistent/lexicon.tsv";
  EXPECT_THROW(make_lexicon_detector(cfg), Error);
}

TEST(Filter, LexiconFromFile) {
  const std::string path = ::testing::TempDir() + "lex.tsv";
  std::ofstream(path) << "NONVERBAL\tnah\n";
  FilterConfig cfg;
  cfg.cue_lexicon_path = path;
  auto d = make_lexicon_detector(cfg);
  EXPECT_EQ(d->detect("nah, not really").size(), 1u);
}
