#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "negforge/backend.hpp"
#include "negforge/filter.hpp"
#include "negforge/syntax.hpp"

namespace negforge {

/// Ordered labeled tree stored in left-to-right postorder; the root is last.
class LabeledTree {
 public:
  struct Node {
    std::string label;
    std::vector<int> children;  // indices into nodes(), left to right
  };

  LabeledTree() = default;
  /// Throws InvalidArgument unless `nodes` is a single tree in postorder.
  explicit LabeledTree(std::vector<Node> nodes);

  static LabeledTree leaf(std::string label);
  static LabeledTree node(std::string label, const std::vector<LabeledTree>& children);
  /// "A(B,C(D))" notation; labels are runs of characters other than "(),".
  static LabeledTree parse(std::string_view bracket);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }
  std::string to_string() const;

  bool operator==(const LabeledTree&) const;

 private:
  std::vector<Node> nodes_;
};

/// Zhang-Shasha ordered tree edit distance with unit relabel/insert/delete.
std::size_t tree_edit_distance(const LabeledTree& a, const LabeledTree& b);
/// Distance divided by the larger tree size; 0 for two empty trees.
double normalized_tree_edit_distance(const LabeledTree& a, const LabeledTree& b);

/// Dependency tree labeled by UPOS, children in surface order.
LabeledTree sentence_tree(const DepSentence& sent);

/// Parse of a negated sentence projected from the original: the tokens of
/// each span are replaced by the answer's words, words shared with the span
/// keep their analysis, inserted closed-class words get their usual tag and
/// hang off the span's head. Empty answers delete the span.
DepSentence project_parse(const DepSentence& original, const std::vector<SpanRange>& spans,
                          const std::vector<std::string>& answers);

/// BLEU of one tokenized hypothesis against references, uniform weights up to
/// min(max_n, |hyp|), add-one smoothing for orders above 1 with no match.
double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs,
                     int max_n = 4);
/// Mean BLEU of each sentence against the rest; nullopt for fewer than two.
std::optional<double> self_bleu(const std::vector<std::string>& set, int max_n = 4);

/// exp of the negative mean log-probability. Throws InvalidArgument if empty.
double perplexity(const std::vector<double>& logprobs);
double perplexity(const ScoredSequence& scored);

/// Mean normalized Levenshtein over normalized pairs. Throws on empty input.
double nld_avg(const std::vector<std::pair<std::string, std::string>>& pairs, DistanceUnit unit = DistanceUnit::Token);

struct MetricSummary {
  std::optional<double> mean;
  std::size_t n = 0;
};

/// Per-original results feeding the report.
struct SentenceMetrics {
  std::vector<double> nld;        // one per kept negation
  std::vector<double> syntactic;  // one per kept negation that has a parse
  std::optional<double> self_bleu;
  std::vector<double> ppl;
  std::map<std::string, std::size_t> skipped;
};

struct EvalReport {
  MetricSummary nld;
  MetricSummary syntactic;
  MetricSummary self_bleu;
  std::optional<MetricSummary> ppl;  // nullopt when no scoring backend
  std::size_t sentences = 0;
  std::map<std::string, std::size_t> skipped;

  /// {"nld":{"mean","n"},"syntactic":…,"self_bleu":…,"ppl":…|null,
  ///  "fluency":null,"grammar":null,"sentences":k,"skipped":{…}}
  std::string to_json() const;
  std::string to_table() const;
};

EvalReport build_report(const std::vector<SentenceMetrics>& per_sentence, bool ppl_available);

}  // namespace negforge
