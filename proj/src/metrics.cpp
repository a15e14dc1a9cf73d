#include "negforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "negforge/error.hpp"
#include "negforge/text.hpp"

namespace negforge {

LabeledTree::LabeledTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  const int n = static_cast<int>(nodes_.size());
  if (n == 0) return;
  std::vector<int> parent(n, -1), leftmost(n, 0);
  for (int i = 0; i < n; ++i) {
    const auto& ch = nodes_[i].children;
    for (std::size_t k = 0; k < ch.size(); ++k) {
      const int c = ch[k];
      if (c < 0 || c >= i) throw InvalidArgument("tree child index must precede its parent");
      if (parent[c] != -1) throw InvalidArgument("tree node has two parents");
      parent[c] = i;
      // Consecutive children own consecutive postorder blocks.
      const int expected_end = k + 1 < ch.size() ? leftmost[ch[k + 1]] - 1 : i - 1;
      if (c != expected_end) throw InvalidArgument("tree nodes are not in postorder");
    }
    leftmost[i] = ch.empty() ? i : leftmost[ch.front()];
  }
  if (leftmost[n - 1] != 0) throw InvalidArgument("tree has more than one root");
}

LabeledTree LabeledTree::leaf(std::string label) { return LabeledTree({Node{std::move(label), {}}}); }

LabeledTree LabeledTree::node(std::string label, const std::vector<LabeledTree>& children) {
  std::vector<Node> out;
  std::vector<int> roots;
  for (const auto& c : children) {
    const int off = static_cast<int>(out.size());
    for (auto nd : c.nodes_) {
      for (int& k : nd.children) k += off;
      out.push_back(std::move(nd));
    }
    if (!c.empty()) roots.push_back(off + c.root());
  }
  out.push_back(Node{std::move(label), std::move(roots)});
  return LabeledTree(std::move(out));
}

namespace {

LabeledTree parse_subtree(std::string_view s, std::size_t& pos) {
  auto skip = [&] {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  };
  skip();
  const std::size_t b = pos;
  while (pos < s.size() && s[pos] != '(' && s[pos] != ')' && s[pos] != ',' && s[pos] != ' ') ++pos;
  if (pos == b) throw InvalidArgument("tree notation: expected a label at offset " + std::to_string(b));
  std::string label(s.substr(b, pos - b));
  skip();
  std::vector<LabeledTree> kids;
  if (pos < s.size() && s[pos] == '(') {
    ++pos;
    while (true) {
      kids.push_back(parse_subtree(s, pos));
      skip();
      if (pos < s.size() && s[pos] == ',') {
        ++pos;
        continue;
      }
      if (pos < s.size() && s[pos] == ')') {
        ++pos;
        break;
      }
      throw InvalidArgument("tree notation: expected ',' or ')' at offset " + std::to_string(pos));
    }
  }
  return LabeledTree::node(std::move(label), kids);
}

void write_subtree(const LabeledTree& t, int i, std::string& out) {
  const auto& nd = t.nodes()[i];
  out += nd.label;
  if (nd.children.empty()) return;
  out += '(';
  for (std::size_t k = 0; k < nd.children.size(); ++k) {
    if (k) out += ',';
    write_subtree(t, nd.children[k], out);
  }
  out += ')';
}

}  // namespace

LabeledTree LabeledTree::parse(std::string_view bracket) {
  std::size_t pos = 0;
  LabeledTree t = parse_subtree(bracket, pos);
  while (pos < bracket.size() && bracket[pos] == ' ') ++pos;
  if (pos != bracket.size()) throw InvalidArgument("tree notation: trailing characters");
  return t;
}

std::string LabeledTree::to_string() const {
  std::string out;
  if (!empty()) write_subtree(*this, root(), out);
  return out;
}

bool LabeledTree::operator==(const LabeledTree& o) const {
  if (nodes_.size() != o.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].label != o.nodes_[i].label || nodes_[i].children != o.nodes_[i].children) return false;
  }
  return true;
}

std::size_t tree_edit_distance(const LabeledTree& a, const LabeledTree& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  if (n == 0 || m == 0) return static_cast<std::size_t>(n + m);

  auto leftmost_of = [](const LabeledTree& t) {
    std::vector<int> l(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& ch = t.nodes()[i].children;
      l[i] = ch.empty() ? static_cast<int>(i) : l[ch.front()];
    }
    return l;
  };
  auto keyroots_of = [](const std::vector<int>& l) {
    std::vector<int> kr;
    std::vector<bool> seen(l.size(), false);
    for (int i = static_cast<int>(l.size()) - 1; i >= 0; --i) {
      if (!seen[l[i]]) {
        seen[l[i]] = true;
        kr.push_back(i);
      }
    }
    std::sort(kr.begin(), kr.end());
    return kr;
  };
  const auto la = leftmost_of(a), lb = leftmost_of(b);
  const auto ka = keyroots_of(la), kb = keyroots_of(lb);

  std::vector<std::vector<std::size_t>> td(n, std::vector<std::size_t>(m, 0));
  std::vector<std::vector<std::size_t>> fd(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (int i : ka) {
    for (int j : kb) {
      const int li = la[i], lj = lb[j];
      const int rows = i - li + 1, cols = j - lj + 1;
      fd[0][0] = 0;
      for (int x = 1; x <= rows; ++x) fd[x][0] = fd[x - 1][0] + 1;
      for (int y = 1; y <= cols; ++y) fd[0][y] = fd[0][y - 1] + 1;
      for (int x = 1; x <= rows; ++x) {
        const int u = li + x - 1;
        for (int y = 1; y <= cols; ++y) {
          const int v = lj + y - 1;
          const std::size_t del = fd[x - 1][y] + 1, ins = fd[x][y - 1] + 1;
          if (la[u] == li && lb[v] == lj) {
            const std::size_t rel = fd[x - 1][y - 1] + (a.nodes()[u].label == b.nodes()[v].label ? 0 : 1);
            fd[x][y] = std::min({del, ins, rel});
            td[u][v] = fd[x][y];
          } else {
            fd[x][y] = std::min({del, ins, fd[la[u] - li][lb[v] - lj] + td[u][v]});
          }
        }
      }
    }
  }
  return td[n - 1][m - 1];
}

double normalized_tree_edit_distance(const LabeledTree& a, const LabeledTree& b) {
  const std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(tree_edit_distance(a, b)) / static_cast<double>(denom);
}

LabeledTree sentence_tree(const DepSentence& sent) {
  std::vector<LabeledTree::Node> nodes;
  nodes.reserve(sent.size());
  // Iterative postorder: (token, next child position).
  std::vector<std::pair<int, std::size_t>> stack{{sent.root(), 0}};
  std::vector<std::vector<int>> built(sent.size() + 1);
  while (!stack.empty()) {
    auto& [tok, next] = stack.back();
    const auto& kids = sent.children(tok);
    if (next < kids.size()) {
      const int c = kids[next++];
      stack.emplace_back(c, 0);
      continue;
    }
    std::vector<int> child_nodes;
    for (int c : kids) child_nodes.push_back(built[c].front());
    nodes.push_back({sent.token(tok).upos, std::move(child_nodes)});
    built[tok] = {static_cast<int>(nodes.size()) - 1};
    stack.pop_back();
  }
  return LabeledTree(std::move(nodes));
}

namespace {

struct ClosedClass {
  std::string_view upos;
  std::string_view deprel;
};

std::optional<ClosedClass> closed_class(std::string_view lower) {
  static const std::map<std::string_view, ClosedClass> table{
      {"not", {"PART", "advmod"}},   {"n't", {"PART", "advmod"}},   {"never", {"ADV", "advmod"}},
      {"rarely", {"ADV", "advmod"}}, {"seldom", {"ADV", "advmod"}}, {"nowhere", {"ADV", "advmod"}},
      {"no", {"DET", "det"}},        {"none", {"PRON", "nsubj"}},   {"nobody", {"PRON", "nsubj"}},
      {"nothing", {"PRON", "obj"}},  {"one", {"PRON", "nsubj"}},    {"without", {"ADP", "case"}},
      {"neither", {"CCONJ", "cc"}},  {"nor", {"CCONJ", "cc"}},      {"the", {"DET", "det"}},
      {"a", {"DET", "det"}},         {"an", {"DET", "det"}},        {"of", {"ADP", "case"}},
      {"am", {"AUX", "aux"}},        {"is", {"AUX", "aux"}},        {"are", {"AUX", "aux"}},
      {"was", {"AUX", "aux"}},       {"were", {"AUX", "aux"}},      {"do", {"AUX", "aux"}},
      {"does", {"AUX", "aux"}},      {"did", {"AUX", "aux"}},       {"have", {"AUX", "aux"}},
      {"has", {"AUX", "aux"}},       {"had", {"AUX", "aux"}},       {"will", {"AUX", "aux"}},
      {"wo", {"AUX", "aux"}},        {"can", {"AUX", "aux"}},       {"ca", {"AUX", "aux"}},
      {"could", {"AUX", "aux"}},     {"would", {"AUX", "aux"}},     {"should", {"AUX", "aux"}},
      {"must", {"AUX", "aux"}},      {"may", {"AUX", "aux"}},       {"might", {"AUX", "aux"}},
      {"shall", {"AUX", "aux"}},     {"longer", {"ADV", "advmod"}}, {"yet", {"ADV", "advmod"}},
  };
  if (auto it = table.find(lower); it != table.end()) return it->second;
  return std::nullopt;
}

bool word_char(char c) { return is_ascii_alnum(c) || c == '\'' || c == '-' || static_cast<unsigned char>(c) >= 0x80; }

/// UD-style word split: punctuation peeled off, n't and cannot separated.
std::vector<std::string> answer_words(std::string_view answer) {
  std::vector<std::string> out;
  for (auto& w : split_ws(answer)) {
    std::size_t b = 0, e = w.size();
    while (b < e && !word_char(w[b])) out.emplace_back(1, w[b++]);
    std::vector<std::string> tail;
    while (e > b && !word_char(w[e - 1])) tail.emplace(tail.begin(), 1, w[--e]);
    std::string core = w.substr(b, e - b);
    for (std::size_t p = core.find("\xE2\x80\x99"); p != std::string::npos; p = core.find("\xE2\x80\x99", p)) {
      core.replace(p, 3, "'");
    }
    const std::string lower = to_lower(core);
    if (lower == "cannot") {
      out.push_back(core.substr(0, 3));
      out.push_back(core.substr(3));
    } else if (core.size() > 3 && lower.ends_with("n't")) {
      out.push_back(core.substr(0, core.size() - 3));
      out.push_back(core.substr(core.size() - 3));
    } else if (!core.empty()) {
      out.push_back(core);
    }
    for (auto& t : tail) out.push_back(std::move(t));
  }
  return out;
}

/// Longest common subsequence alignment on lowercase surfaces: result[i] is
/// the matched index into `b` for a[i], or -1.
std::vector<int> lcs_align(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      dp[i][j] = to_lower(a[i]) == to_lower(b[j]) ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);
    }
  }
  std::vector<int> out(n, -1);
  for (std::size_t i = 0, j = 0; i < n && j < m;) {
    if (to_lower(a[i]) == to_lower(b[j])) {
      out[i] = static_cast<int>(j);
      ++i;
      ++j;
    } else if (dp[i + 1][j] >= dp[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

}  // namespace

DepSentence project_parse(const DepSentence& original, const std::vector<SpanRange>& spans,
                          const std::vector<std::string>& answers) {
  if (spans.size() != answers.size()) throw InvalidArgument("project_parse: one answer per span required");
  const int n = original.size();
  std::vector<int> span_of(n + 1, -1);
  for (std::size_t s = 0; s < spans.size(); ++s) {
    if (spans[s].start < 1 || spans[s].end > n || spans[s].start > spans[s].end) {
      throw InvalidArgument("project_parse: span out of range");
    }
    for (int i = spans[s].start; i <= spans[s].end; ++i) {
      if (span_of[i] != -1) throw InvalidArgument("project_parse: overlapping spans");
      span_of[i] = static_cast<int>(s);
    }
  }

  struct Proto {
    Token tok;
    int orig = 0;      // carried original index, 0 if inserted
    int span = -1;
    int attach = -1;   // inserted non-anchor: span whose anchor it hangs off
    bool anchor = false;
  };
  std::vector<Proto> protos;
  std::vector<int> new_of(n + 1, 0);
  std::vector<int> anchor_new(spans.size(), 0);
  std::vector<int> span_head(spans.size(), 0);

  auto emit_span = [&](int s) {
    const SpanRange sp = spans[s];
    int head = 0;
    for (int i = sp.start; i <= sp.end && head == 0; ++i) {
      if (!sp.contains(original.token(i).head)) head = i;
    }
    span_head[s] = head;
    std::vector<std::string> orig_words;
    for (int i = sp.start; i <= sp.end; ++i) orig_words.push_back(original.token(i).surface);
    const auto words = answer_words(answers[s]);
    const auto match = lcs_align(words, orig_words);

    const std::size_t first = protos.size();
    for (std::size_t k = 0; k < words.size(); ++k) {
      Proto p;
      p.span = s;
      if (match[k] >= 0) {
        const int oi = sp.start + match[k];
        p.tok = original.token(oi);
        p.tok.surface = words[k];
        p.orig = oi;
      } else {
        p.tok.surface = words[k];
        const std::string lower = to_lower(words[k]);
        if (auto cc = closed_class(lower)) {
          p.tok.upos = std::string(cc->upos);
          p.tok.deprel = std::string(cc->deprel);
        } else if (!words[k].empty() && !word_char(words[k][0])) {
          p.tok.upos = "PUNCT";
          p.tok.deprel = "punct";
        } else {
          p.tok.upos = "X";
          p.tok.deprel = "dep";
        }
        p.attach = s;
      }
      protos.push_back(std::move(p));
    }

    int anchor = -1;
    for (std::size_t k = first; k < protos.size(); ++k) {
      if (protos[k].orig == head) anchor = static_cast<int>(k);
    }
    if (anchor < 0) {
      for (std::size_t k = protos.size(); k-- > first;) {
        if (protos[k].orig == 0 && protos[k].tok.upos == "X") {
          anchor = static_cast<int>(k);
          break;
        }
      }
    }
    if (anchor < 0) {
      for (std::size_t k = protos.size(); k-- > first;) {
        if (protos[k].orig == 0 && protos[k].tok.upos != "PUNCT") {
          anchor = static_cast<int>(k);
          break;
        }
      }
    }
    if (anchor >= 0) {
      Proto& a = protos[anchor];
      a.anchor = true;
      a.attach = -1;
      if (a.orig == 0) {
        const Token& h = original.token(head);
        if (a.tok.upos == "X") a.tok.upos = h.upos;
        a.tok.deprel = h.deprel;
      }
      anchor_new[s] = anchor + 1;
    }
  };

  for (int i = 1; i <= n;) {
    if (span_of[i] >= 0) {
      const int s = span_of[i];
      emit_span(s);
      i = spans[s].end + 1;
    } else {
      protos.push_back({original.token(i), i, -1, -1, false});
      ++i;
    }
  }
  if (protos.empty()) throw InvalidArgument("project_parse: projected sentence is empty");
  for (std::size_t k = 0; k < protos.size(); ++k) {
    if (protos[k].orig) new_of[protos[k].orig] = static_cast<int>(k) + 1;
  }

  auto resolve = [&](int h) {
    while (h != 0) {
      if (new_of[h]) return new_of[h];
      if (span_of[h] >= 0 && anchor_new[span_of[h]]) return anchor_new[span_of[h]];
      h = original.token(h).head;
    }
    return 0;
  };

  const int m = static_cast<int>(protos.size());
  std::vector<int> heads(m + 1, 0);
  for (int k = 0; k < m; ++k) {
    const Proto& p = protos[k];
    if (p.anchor && p.orig == 0) {
      heads[k + 1] = resolve(original.token(span_head[p.span]).head);
    } else if (p.orig) {
      heads[k + 1] = resolve(original.token(p.orig).head);
    } else if (anchor_new[p.attach]) {
      heads[k + 1] = anchor_new[p.attach];
    } else {
      heads[k + 1] = resolve(original.token(span_head[p.attach]).head);
    }
    if (heads[k + 1] == k + 1) heads[k + 1] = 0;
  }

  // Collapsing spans can close a loop or leave several roots; repair both.
  for (int k = 1; k <= m; ++k) {
    std::vector<char> on_path(m + 1, 0);
    int x = k;
    while (x != 0 && !on_path[x]) {
      on_path[x] = 1;
      x = heads[x];
    }
    if (x != 0) heads[x] = 0;
  }
  int main_root = 0;
  if (original.root() && new_of[original.root()] && heads[new_of[original.root()]] == 0) {
    main_root = new_of[original.root()];
  }
  for (int k = 1; k <= m && main_root == 0; ++k) {
    if (heads[k] == 0) main_root = k;
  }
  std::vector<Token> toks;
  for (int k = 1; k <= m; ++k) {
    Token t = protos[k - 1].tok;
    t.index = k;
    t.head = (heads[k] == 0 && k != main_root) ? main_root : heads[k];
    if (t.head == 0) t.deprel = "root";
    if (!protos[k - 1].orig) t.space_after = true;
    toks.push_back(std::move(t));
  }
  return DepSentence(std::move(toks), original.sent_id());
}

double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs,
                     int max_n) {
  if (hyp.empty() || refs.empty() || max_n < 1) return 0.0;
  const int order = std::min<int>(max_n, static_cast<int>(hyp.size()));
  using Gram = std::vector<std::string>;
  auto grams = [](const std::vector<std::string>& toks, int k) {
    std::map<Gram, int> out;
    for (std::size_t i = 0; i + k <= toks.size(); ++i) ++out[Gram(toks.begin() + i, toks.begin() + i + k)];
    return out;
  };
  double log_sum = 0.0;
  for (int k = 1; k <= order; ++k) {
    const auto h = grams(hyp, k);
    std::map<Gram, int> ref_max;
    for (const auto& r : refs) {
      for (const auto& [g, c] : grams(r, k)) ref_max[g] = std::max(ref_max[g], c);
    }
    int clipped = 0;
    for (const auto& [g, c] : h) {
      if (auto it = ref_max.find(g); it != ref_max.end()) clipped += std::min(c, it->second);
    }
    const int total = static_cast<int>(hyp.size()) - k + 1;
    double p;
    if (clipped > 0) {
      p = static_cast<double>(clipped) / total;
    } else if (k == 1) {
      return 0.0;
    } else {
      p = 1.0 / (total + 1);
    }
    log_sum += std::log(p);
  }
  const auto c = static_cast<double>(hyp.size());
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = std::abs(static_cast<long>(r.size()) - static_cast<long>(hyp.size()));
    const auto bd = std::abs(static_cast<long>(best) - static_cast<long>(hyp.size()));
    if (d < bd || (d == bd && r.size() < best)) best = r.size();
  }
  const double bp = c > static_cast<double>(best) ? 1.0 : std::exp(1.0 - static_cast<double>(best) / c);
  return bp * std::exp(log_sum / order);
}

std::optional<double> self_bleu(const std::vector<std::string>& set, int max_n) {
  if (set.size() < 2) return std::nullopt;
  std::vector<std::vector<std::string>> toks;
  for (const auto& s : set) toks.push_back(split_ws(s));
  double sum = 0.0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::vector<std::vector<std::string>> refs;
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (j != i) refs.push_back(toks[j]);
    }
    sum += sentence_bleu(toks[i], refs, max_n);
  }
  return sum / static_cast<double>(toks.size());
}

double perplexity(const std::vector<double>& logprobs) {
  if (logprobs.empty()) throw InvalidArgument("perplexity of an empty sequence");
  const double sum = std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

double perplexity(const ScoredSequence& scored) { return perplexity(scored.logprobs); }

double nld_avg(const std::vector<std::pair<std::string, std::string>>& pairs, DistanceUnit unit) {
  if (pairs.empty()) throw InvalidArgument("nld_avg of an empty list");
  double sum = 0.0;
  for (const auto& [a, b] : pairs) sum += norm_levenshtein(normalize(a), normalize(b), unit);
  return sum / static_cast<double>(pairs.size());
}

namespace {

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  s.n = v.size();
  if (!v.empty()) s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return s;
}

nlohmann::ordered_json summary_json(const MetricSummary& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean ? nlohmann::ordered_json(*s.mean) : nlohmann::ordered_json(nullptr);
  j["n"] = s.n;
  return j;
}

}  // namespace

EvalReport build_report(const std::vector<SentenceMetrics>& per_sentence, bool ppl_available) {
  std::vector<double> nld, syn, bleu, ppl;
  EvalReport r;
  r.sentences = per_sentence.size();
  for (const auto& s : per_sentence) {
    nld.insert(nld.end(), s.nld.begin(), s.nld.end());
    syn.insert(syn.end(), s.syntactic.begin(), s.syntactic.end());
    if (s.self_bleu) bleu.push_back(*s.self_bleu);
    ppl.insert(ppl.end(), s.ppl.begin(), s.ppl.end());
    for (const auto& [k, v] : s.skipped) r.skipped[k] += v;
  }
  r.nld = summarize(nld);
  r.syntactic = summarize(syn);
  r.self_bleu = summarize(bleu);
  if (ppl_available) r.ppl = summarize(ppl);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["nld"] = summary_json(nld);
  j["syntactic"] = summary_json(syntactic);
  j["self_bleu"] = summary_json(self_bleu);
  j["ppl"] = ppl ? summary_json(*ppl) : nlohmann::ordered_json(nullptr);
  j["fluency"] = nullptr;
  j["grammar"] = nullptr;
  j["sentences"] = sentences;
  j["skipped"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : skipped) j["skipped"][k] = v;
  return j.dump();
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  auto row = [&](std::string_view name, const std::optional<MetricSummary>& s) {
    os << std::left << std::setw(12) << name << std::right << std::setw(10);
    if (s && s->mean) {
      os << std::fixed << std::setprecision(4) << *s->mean;
    } else {
      os << "-";
    }
    os << std::setw(8) << (s ? std::to_string(s->n) : std::string("-")) << '\n';
  };
  os << std::left << std::setw(12) << "metric" << std::right << std::setw(10) << "mean" << std::setw(8) << "n"
     << '\n';
  row("NLD", nld);
  row("Syntactic", syntactic);
  row("Self-BLEU", self_bleu);
  row("PPL", ppl);
  row("Fluency", std::nullopt);
  row("Grammar", std::nullopt);
  os << "sentences: " << sentences << '\n';
  for (const auto& [k, v] : skipped) os << "skipped " << k << ": " << v << '\n';
  return os.str();
}

}  // namespace negforge
