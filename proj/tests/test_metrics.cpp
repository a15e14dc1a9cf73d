#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "negforge/error.hpp"
#include "negforge/metrics.hpp"
#include "negforge/text.hpp"
#include "oracles.hpp"

using namespace negforge;

namespace {

DepSentence demo(const std::string& id) {
  for (auto& s : parse_conllu(oracle::read_file(oracle::data_file("demo_corpus.conllu"))))
    if (s.sent_id() == id) return s;
  throw std::runtime_error(id);
}

std::vector<std::string> words(const std::string& s) { return split_ws(s); }

}  // namespace

TEST(Tree, BracketNotation) {
  auto t = LabeledTree::parse("A(B,C(D))");
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.to_string(), "A(B,C(D))");
  EXPECT_EQ(t.nodes()[t.root()].label, "A");
  EXPECT_EQ(t, LabeledTree::node("A", {LabeledTree::leaf("B"), LabeledTree::node("C", {LabeledTree::leaf("D")})}));
  EXPECT_THROW(LabeledTree::parse("A(B"), InvalidArgument);
  EXPECT_THROW(LabeledTree::parse("A)B"), InvalidArgument);
  EXPECT_THROW(LabeledTree({{"a", {}}, {"b", {}}}), InvalidArgument);  // two roots
}

TEST(Ted, KnownDistances) {
  auto d = [](const char* a, const char* b) { return tree_edit_distance(LabeledTree::parse(a), LabeledTree::parse(b)); };
  EXPECT_EQ(d("a", "a"), 0u);
  EXPECT_EQ(d("a", "b"), 1u);
  EXPECT_EQ(d("a(b,c)", "a(c)"), 1u);
  EXPECT_EQ(d("a(b(c,d))", "a(c,d)"), 1u);
  // Classic example: f(d(a,c(b)),e) vs f(c(d(a,b)),e) = 2.
  EXPECT_EQ(d("f(d(a,c(b)),e)", "f(c(d(a,b)),e)"), 2u);
  EXPECT_EQ(tree_edit_distance(LabeledTree{}, LabeledTree::parse("a(b)")), 2u);
  EXPECT_DOUBLE_EQ(normalized_tree_edit_distance(LabeledTree::parse("a(b,c)"), LabeledTree::parse("a")), 2.0 / 3.0);
  EXPECT_EQ(normalized_tree_edit_distance(LabeledTree{}, LabeledTree{}), 0.0);
}

TEST(Ted, AgreesWithSearchOnSmallTrees) {
  const auto trees = oracle::all_trees(3, "ab");
  ASSERT_EQ(trees.size(), 22u);
  oracle::TedSearch search(3, "ab");
  for (const auto& a : trees) {
    auto dist = search.all_from(oracle::to_flat(a));
    for (const auto& b : trees)
      ASSERT_EQ(tree_edit_distance(a, b), static_cast<std::size_t>(dist.at(oracle::to_flat(b))))
          << a.to_string() << " vs " << b.to_string();
  }
}

TEST(Ted, RandomPairsAgreeWithSearch) {
  std::mt19937_64 rng(5);
  oracle::TedSearch search(4, "ab");
  for (int i = 0; i < 60; ++i) {
    auto a = oracle::random_tree(rng, 4, "ab"), b = oracle::random_tree(rng, 1 + rng() % 4, "ab");
    ASSERT_EQ(tree_edit_distance(a, b), static_cast<std::size_t>(search.distance(oracle::to_flat(a), oracle::to_flat(b))));
  }
}

TEST(SentenceTree, UposLabels) {
  auto t = sentence_tree(demo("demo-08"));  // She was eating an apple.
  EXPECT_EQ(t.to_string(), "VERB(PRON,AUX,NOUN(DET),PUNCT)");
}

TEST(Projection, InsertedNegatorCostsOneEdit) {
  auto s = demo("demo-08");
  auto neg = project_parse(s, {{2, 2}}, {"wasn't"});
  EXPECT_EQ(render_text(neg), "She was n't eating an apple.");
  EXPECT_EQ(tree_edit_distance(sentence_tree(s), sentence_tree(neg)), 1u);
  EXPECT_EQ(neg.token(3).upos, "PART");
  EXPECT_EQ(neg.token(3).head, 2);  // hangs off the span's head word

  auto never = project_parse(s, {{2, 2}}, {"never was"});
  EXPECT_EQ(tree_edit_distance(sentence_tree(s), sentence_tree(never)), 1u);
}

TEST(Projection, DeterminerSwapAndDeletion) {
  auto s = demo("demo-08");
  auto no = project_parse(s, {{4, 4}}, {"no"});
  EXPECT_EQ(render_text(no), "She was eating no apple.");
  EXPECT_EQ(tree_edit_distance(sentence_tree(s), sentence_tree(no)), 0u);
  auto del = project_parse(s, {{4, 5}}, {""});
  EXPECT_EQ(del.size(), 4);
  EXPECT_EQ(tree_edit_distance(sentence_tree(s), sentence_tree(del)), 2u);
}

TEST(Projection, AlwaysSingleRootedTree) {
  auto s = demo("demo-12");
  for (const char* a : {"never", "not always", "", "by no means at all", "."}) {
    auto p = project_parse(s, {{3, 3}}, {a});
    EXPECT_EQ(std::count_if(p.tokens().begin(), p.tokens().end(), [](const Token& t) { return t.head == 0; }), 1);
  }
  EXPECT_THROW(project_parse(s, {{3, 3}}, {}), InvalidArgument);
}

TEST(Bleu, HandComputed) {
  // hyp "the cat sat" vs refs {"the cat ran","a dog ran"}, N=2:
  // p1 = 2/3, p2 = 1/2 -> sqrt(1/3).
  EXPECT_NEAR(sentence_bleu(words("the cat sat"), {words("the cat ran"), words("a dog ran")}, 2), std::sqrt(1.0 / 3.0),
              1e-12);
  // No unigram overlap.
  EXPECT_EQ(sentence_bleu(words("x y"), {words("a b")}), 0.0);
  // Brevity penalty against the closest reference length.
  EXPECT_NEAR(sentence_bleu(words("a b"), {words("a b c d")}, 2), std::exp(1.0 - 4.0 / 2.0), 1e-12);
  auto sb = self_bleu({"the cat sat", "the cat ran", "a dog ran"}, 2);
  ASSERT_TRUE(sb);
  EXPECT_NEAR(*sb, (std::sqrt(1.0 / 3.0) + std::sqrt(0.5) + 1.0 / 3.0) / 3.0, 1e-12);
}

TEST(Bleu, Properties) {
  EXPECT_FALSE(self_bleu({"only one"}).has_value());
  EXPECT_FALSE(self_bleu({}).has_value());
  for (int k = 2; k <= 6; ++k) {
    EXPECT_NEAR(*self_bleu(std::vector<std::string>(k, "They were not cooking dinner"), 4), 1.0, 1e-9);
  }
  std::mt19937_64 rng(1);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e"};
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> set;
    for (int k = 2 + static_cast<int>(rng() % 3); k > 0; --k) {
      std::string s;
      for (int w = 1 + static_cast<int>(rng() % 6); w > 0; --w) s += vocab[rng() % vocab.size()] + " ";
      set.push_back(s);
    }
    const double v = *self_bleu(set);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(Perplexity, Formula) {
  EXPECT_NEAR(perplexity(std::vector<double>(7, -std::log(2.0))), 2.0, 1e-12);
  EXPECT_NEAR(perplexity({0.0, 0.0}), 1.0, 1e-12);
  EXPECT_NEAR(perplexity(ScoredSequence{{"a", "b"}, {-1.0, -3.0}}), std::exp(2.0), 1e-12);
  EXPECT_THROW(perplexity(std::vector<double>{}), InvalidArgument);
}

TEST(Nld, Average) {
  EXPECT_EQ(nld_avg({{"They were cooking.", "they were cooking"}}), 0.0);
  EXPECT_NEAR(nld_avg({{"they were cooking", "they weren't cooking"}, {"a b", "a b"}}), 1.0 / 6.0, 1e-12);
  EXPECT_THROW(nld_avg({}), InvalidArgument);
}

TEST(Report, AggregatesAndSerializes) {
  SentenceMetrics a;
  a.nld = {0.2, 0.4};
  a.syntactic = {1.0};
  a.self_bleu = 0.5;
  a.skipped["syntactic_no_parse"] = 1;
  SentenceMetrics b;
  b.skipped["no_kept"] = 1;
  auto r = build_report({a, b}, false);
  EXPECT_EQ(r.sentences, 2u);
  EXPECT_NEAR(*r.nld.mean, 0.3, 1e-12);
  EXPECT_EQ(r.nld.n, 2u);
  EXPECT_EQ(r.self_bleu.n, 1u);
  EXPECT_FALSE(r.ppl.has_value());
  auto j = nlohmann::json::parse(r.to_json());
  EXPECT_TRUE(j.at("ppl").is_null());
  EXPECT_TRUE(j.at("fluency").is_null());
  EXPECT_TRUE(j.at("grammar").is_null());
  EXPECT_EQ(j.at("skipped").at("no_kept"), 1);
  EXPECT_NE(r.to_table().find("NLD"), std::string::npos);

  auto empty = build_report({}, true);
  EXPECT_FALSE(empty.nld.mean.has_value());
  ASSERT_TRUE(empty.ppl.has_value());
  EXPECT_EQ(empty.ppl->n, 0u);
  EXPECT_TRUE(nlohmann::json::parse(empty.to_json()).at("nld").at("mean").is_null());
}
