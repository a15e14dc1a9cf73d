#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "negforge/text.hpp"

using namespace negforge;

TEST(Text, SplitJoinTrim) {
  EXPECT_EQ(split_ws("  a\tb  c\n"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_ws("   ").empty());
  EXPECT_EQ(join({"a", "b", "c"}, ", "), "a, b, c");
  EXPECT_EQ(trim("\t x y \n"), "x y");
  EXPECT_EQ(collapse_spaces(" a   b  "), "a b");
  EXPECT_EQ(to_lower("ÉtÉ ABC"), "\xc3\x89t\xc3\x89 abc");
}

TEST(Text, InitialCase) {
  EXPECT_EQ(capitalize_first("never"), "Never");
  EXPECT_EQ(capitalize_first(""), "");
  EXPECT_EQ(match_initial_case("no one", "Everyone"), "No one");
  EXPECT_EQ(match_initial_case("Nobody", "everyone"), "nobody");
}

TEST(Text, Utf8Codepoints) {
  EXPECT_EQ(utf8_codepoints("café").size(), 4u);
  EXPECT_EQ(utf8_codepoints("café").back(), U'é');
  EXPECT_EQ(utf8_codepoints("\xff" "a").size(), 2u);
}

TEST(Text, Fnv1a) {
  EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(stable_hash("foobar"), 0x85944171f73967e8ULL);
}

TEST(Text, MixSeedSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(Rng, ReproducibleAndBounded) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    EXPECT_EQ(x, b.below(7));
    EXPECT_LT(x, 7u);
    const double u = a.unit();
    EXPECT_EQ(u, b.unit());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, SampleIndicesProperties) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng r(seed);
    const std::size_t n = seed % 13, k = seed % 7;
    auto s = r.sample_indices(n, k);
    EXPECT_EQ(s.size(), std::min(n, k));
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), s.size());
    for (auto i : s) EXPECT_LT(i, n);
  }
}

TEST(Rng, SampleIndicesCoversAllSubsets) {
  // 2 of 4: all six subsets should show up over enough seeds.
  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t seed = 0; seed < 400; ++seed) seen.insert(Rng(seed).sample_indices(4, 2));
  EXPECT_EQ(seen.size(), 6u);
}
