#include "negforge/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "negforge/error.hpp"
#include "negforge/text.hpp"

namespace negforge {

namespace {

constexpr std::size_t kMinStem = 3;

bool ends_with(std::string_view s, std::string_view suf) {
  return s.size() >= suf.size() && s.substr(s.size() - suf.size()) == suf;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = nl + 1;
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    fn(line, line_no);
  }
}

}  // namespace

std::string_view to_string(CueClass c) {
  switch (c) {
    case CueClass::Verbal: return "VERBAL";
    case CueClass::NonVerbal: return "NONVERBAL";
    case CueClass::Affixal: return "AFFIXAL";
    case CueClass::Multiword: return "MULTIWORD";
  }
  return "?";
}

CueClass parse_cue_class(std::string_view s) {
  if (s == "VERBAL") return CueClass::Verbal;
  if (s == "NONVERBAL") return CueClass::NonVerbal;
  if (s == "AFFIXAL") return CueClass::Affixal;
  if (s == "MULTIWORD") return CueClass::Multiword;
  throw InvalidArgument("unknown cue class '" + std::string(s) + "'");
}

CueLexicon CueLexicon::parse(std::string_view lexicon_tsv, std::string_view stem_list) {
  CueLexicon lex;
  for_each_line(stem_list, [&](std::string_view line, std::size_t) { lex.stems_.insert(to_lower(trim(line))); });

  for_each_line(lexicon_tsv, [&](std::string_view line, std::size_t line_no) {
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw InvalidArgument("cue lexicon line " + std::to_string(line_no) + ": expected CLASS<TAB>cue");
    }
    const std::string cls(trim(line.substr(0, tab)));
    const std::string cue = to_lower(trim(line.substr(tab + 1)));
    if (cue.empty()) throw InvalidArgument("cue lexicon line " + std::to_string(line_no) + ": empty cue");
    auto words = split_ws(cue);
    if (cls == "PREFIX") {
      lex.prefixes_.push_back(cue);
    } else if (cls == "SUFFIX") {
      lex.suffixes_.push_back(cue);
    } else if (cls == "EXCLUDE") {
      if (words.size() == 1) {
        lex.excluded_.insert(cue);
      } else {
        lex.phrases_.push_back({std::move(words), PhraseKind::Exclude});
      }
    } else if (cls == "OPTIONAL") {
      lex.phrases_.push_back({std::move(words), PhraseKind::Optional});
    } else {
      CueClass c;
      try {
        c = parse_cue_class(cls);
      } catch (const InvalidArgument&) {
        throw InvalidArgument("cue lexicon line " + std::to_string(line_no) + ": unknown class '" + cls + "'");
      }
      if (words.size() > 1) {
        lex.phrases_.push_back({std::move(words), PhraseKind::Cue});
      } else {
        lex.words_.emplace(cue, c);
        if (c == CueClass::Affixal) lex.affixal_order_.push_back(cue);
      }
    }
  });

  std::stable_sort(lex.phrases_.begin(), lex.phrases_.end(),
                   [](const Phrase& a, const Phrase& b) { return a.words.size() > b.words.size(); });
  // Longest prefixes first so "dis" wins over shorter overlaps.
  std::stable_sort(lex.prefixes_.begin(), lex.prefixes_.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });

  for (const auto& w : lex.affixal_order_) {
    if (auto base = lex.strip_affix(w)) lex.negated_.emplace(*base, w);
  }
  return lex;
}

CueLexicon CueLexicon::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read cue lexicon '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), bundled::kStemList);
}

const CueLexicon& CueLexicon::bundled() {
  static const CueLexicon lex = parse(bundled::kCueLexicon, bundled::kStemList);
  return lex;
}

std::optional<CueClass> CueLexicon::word_class(std::string_view lower) const {
  auto it = words_.find(std::string(lower));
  if (it == words_.end()) return std::nullopt;
  return it->second;
}

bool CueLexicon::reduces_to_stem(std::string_view rest) const {
  auto ok = [&](std::string_view s) { return s.size() >= kMinStem && is_stem(s); };
  if (ok(rest)) return true;
  static const std::pair<std::string_view, std::string_view> kRepairs[] = {
      {"iness", "y"}, {"ness", ""}, {"ily", "y"}, {"ally", ""}, {"ly", ""}, {"ied", "y"}, {"ed", ""},
      {"ed", "e"},    {"d", ""},    {"ies", "y"}, {"es", ""},   {"s", ""},  {"ing", ""}, {"ing", "e"},
  };
  for (const auto& [suf, rep] : kRepairs) {
    if (ends_with(rest, suf) && rest.size() > suf.size()) {
      std::string cand(rest.substr(0, rest.size() - suf.size()));
      cand += rep;
      if (ok(cand)) return true;
    }
  }
  return false;
}

std::optional<std::string> CueLexicon::strip_affix(std::string_view w) const {
  for (const auto& p : prefixes_) {
    if (w.size() <= p.size() || w.substr(0, p.size()) != p) continue;
    std::string_view rest = w.substr(p.size());
    if (!rest.empty() && rest.front() == '-') rest.remove_prefix(1);
    if (reduces_to_stem(rest)) return std::string(rest);
    // "dispirited" = dis + spirited: a doubled consonant collapsed at the seam.
    std::string repaired = p.back() + std::string(rest);
    if (rest.empty() || rest.front() != p.back()) {
      if (reduces_to_stem(repaired)) return repaired;
    }
  }
  for (const auto& s : suffixes_) {
    if (w.size() <= s.size() || !ends_with(w, s)) continue;
    std::string rest(w.substr(0, w.size() - s.size()));
    if (reduces_to_stem(rest)) return rest;
    if (rest.size() > 1 && rest.back() == 'i') {  // penniless -> penny
      rest.back() = 'y';
      if (reduces_to_stem(rest)) return rest;
    }
  }
  return std::nullopt;
}

std::optional<std::string> CueLexicon::affixal_base(std::string_view lower) const {
  if (is_excluded(lower) || is_stem(lower)) return std::nullopt;
  if (auto c = word_class(lower); c && *c == CueClass::Affixal) {
    if (auto base = strip_affix(lower)) return base;
    return std::string(lower);
  }
  return strip_affix(lower);
}

std::optional<std::string> CueLexicon::negated_form(std::string_view lower) const {
  if (auto it = negated_.find(std::string(lower)); it != negated_.end()) return it->second;
  // -ful adjectives pair with -less ("useful" -> "useless").
  if (ends_with(lower, "ful") && lower.size() > 3) {
    std::string cand = std::string(lower.substr(0, lower.size() - 3)) + "less";
    if (auto c = word_class(cand); c && *c == CueClass::Affixal) return cand;
  }
  return std::nullopt;
}

}  // namespace negforge
