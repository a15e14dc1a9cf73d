#include "negforge/filter.hpp"

#include <set>

#include "negforge/error.hpp"
#include "negforge/text.hpp"

namespace negforge {

namespace {

bool is_sentence_punct(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

struct Word {
  std::size_t start;
  std::size_t end;
  std::string lower;  // typographic apostrophes folded to '
};

bool is_word_byte(unsigned char c) { return c >= 0x80 || is_ascii_alnum(static_cast<char>(c)) || c == '\''; }

std::vector<Word> words_of(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_byte(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size()) {
      const auto c = static_cast<unsigned char>(s[j]);
      if (is_word_byte(c)) {
        ++j;
      } else if (c == '-' && j + 1 < s.size() && is_word_byte(static_cast<unsigned char>(s[j + 1])) && j > i) {
        ++j;
      } else {
        break;
      }
    }
    std::string lower = to_lower(s.substr(i, j - i));
    for (std::size_t p = lower.find("\xE2\x80\x99"); p != std::string::npos; p = lower.find("\xE2\x80\x99", p)) {
      lower.replace(p, 3, "'");
    }
    // Quote marks hugging a word are not part of it.
    std::size_t b = i, e = j;
    while (!lower.empty() && lower.front() == '\'') {
      lower.erase(0, 1);
      ++b;
    }
    while (!lower.empty() && lower.back() == '\'' && !(lower.size() > 2 && lower.ends_with("n'"))) {
      lower.pop_back();
      --e;
    }
    if (!lower.empty()) out.push_back({b, e, std::move(lower)});
    i = j;
  }
  return out;
}

// Only whitespace between two words counts as adjacency for phrases.
bool adjacent(std::string_view s, const Word& a, const Word& b) {
  for (std::size_t k = a.end; k < b.start; ++k) {
    if (!is_space(s[k])) return false;
  }
  return true;
}

class OwnedLexiconDetector final : public CueDetector {
 public:
  OwnedLexiconDetector(CueLexicon lex, bool enable_optional)
      : lexicon_(std::move(lex)), inner_(lexicon_, enable_optional) {}
  std::vector<CueSpan> detect(std::string_view s) const override { return inner_.detect(s); }

 private:
  CueLexicon lexicon_;
  LexiconCueDetector inner_;
};

}  // namespace

std::string_view to_string(DistanceUnit u) { return u == DistanceUnit::Token ? "token" : "char"; }

DistanceUnit parse_distance_unit(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "token") return DistanceUnit::Token;
  if (l == "char") return DistanceUnit::Char;
  throw InvalidArgument("unknown distance unit '" + std::string(s) + "'");
}

std::string normalize(std::string_view s) {
  std::string out = to_lower(s);
  while (!out.empty() && (is_space(out.back()) || is_sentence_punct(out.back()))) out.pop_back();
  return std::string(trim(out));
}

std::size_t levenshtein(std::string_view a, std::string_view b, DistanceUnit unit) {
  if (unit == DistanceUnit::Token) {
    const auto ta = split_ws(a), tb = split_ws(b);
    return edit_distance<std::string>(ta, tb);
  }
  const auto ca = utf8_codepoints(a), cb = utf8_codepoints(b);
  return edit_distance<char32_t>(ca, cb);
}

double norm_levenshtein(std::string_view a, std::string_view b, DistanceUnit unit) {
  std::size_t la, lb;
  if (unit == DistanceUnit::Token) {
    la = split_ws(a).size();
    lb = split_ws(b).size();
  } else {
    la = utf8_codepoints(a).size();
    lb = utf8_codepoints(b).size();
  }
  const std::size_t denom = std::max(la, lb);
  if (denom == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b, unit)) / static_cast<double>(denom);
}

std::vector<CueSpan> LexiconCueDetector::detect(std::string_view s) const {
  const CueLexicon& lex = *lexicon_;
  const auto words = words_of(s);
  std::vector<CueSpan> out;
  auto emit = [&](std::size_t first, std::size_t last, CueClass cls) {
    const std::size_t b = words[first].start, e = words[last].end;
    out.push_back({b, e, std::string(s.substr(b, e - b)), cls});
  };

  std::size_t i = 0;
  while (i < words.size()) {
    bool matched_phrase = false;
    for (const auto& ph : lex.phrases()) {
      if (ph.kind == CueLexicon::PhraseKind::Optional && !enable_optional_) continue;
      const std::size_t k = ph.words.size();
      if (i + k > words.size()) continue;
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j) {
        ok = words[i + j].lower == ph.words[j] && (j == 0 || adjacent(s, words[i + j - 1], words[i + j]));
      }
      if (!ok) continue;
      if (ph.kind != CueLexicon::PhraseKind::Exclude) emit(i, i + k - 1, CueClass::Multiword);
      i += k;
      matched_phrase = true;
      break;
    }
    if (matched_phrase) continue;

    const std::string& w = words[i].lower;
    if (lex.is_excluded(w)) {
      ++i;
      continue;
    }
    if (auto cls = lex.word_class(w)) {
      emit(i, i, *cls);
    } else if (w.size() > 3 && w.ends_with("n't")) {
      emit(i, i, CueClass::Verbal);
    } else if (lex.affixal_base(w)) {
      emit(i, i, CueClass::Affixal);
    } else if ((w == "un" || w == "non" || w == "dis") && i + 1 < words.size() &&
               adjacent(s, words[i], words[i + 1]) && lex.reduces_to_stem(words[i + 1].lower)) {
      // Split affix such as "un desirable".
      emit(i, i + 1, CueClass::Affixal);
      i += 2;
      continue;
    }
    ++i;
  }
  return out;
}

std::vector<CueSpan> detect_cues(std::string_view sentence) {
  static const LexiconCueDetector detector;
  return detector.detect(sentence);
}

void FilterConfig::validate() const {
  if (epsilon < 1) throw InvalidArgument("epsilon must be >= 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must lie in (0, 1]");
}

std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::Empty: return "EMPTY";
    case FilterReason::Duplicate: return "DUPLICATE";
    case FilterReason::TooFar: return "TOO_FAR";
    case FilterReason::NoCue: return "NO_CUE";
    case FilterReason::SampledOut: return "SAMPLED_OUT";
  }
  return "?";
}

std::unique_ptr<CueDetector> make_lexicon_detector(const FilterConfig& cfg) {
  if (cfg.cue_lexicon_path.empty()) {
    return std::make_unique<LexiconCueDetector>(CueLexicon::bundled(), cfg.enable_optional_cues);
  }
  return std::make_unique<OwnedLexiconDetector>(CueLexicon::from_file(cfg.cue_lexicon_path), cfg.enable_optional_cues);
}

FilteredSet filter_candidates(std::string_view original, const std::vector<std::string>& candidates,
                              const FilterConfig& cfg, const CueDetector& detector) {
  cfg.validate();
  FilteredSet out;
  out.original = std::string(original);
  const std::string norm_original = normalize(original);

  std::set<std::string> accepted;  // normalized texts admitted on distance
  std::vector<KeptSentence> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::string text(trim(candidates[i]));
    const std::string norm = normalize(text);
    if (norm.empty()) {
      out.rejected.push_back({text, FilterReason::Empty, i});
      continue;
    }
    if (accepted.count(norm)) {
      out.rejected.push_back({text, FilterReason::Duplicate, i});
      continue;
    }
    if (norm_levenshtein(norm, norm_original, cfg.unit) >= cfg.threshold) {
      out.rejected.push_back({text, FilterReason::TooFar, i});
      continue;
    }
    accepted.insert(norm);
    auto cues = detector.detect(text);
    if (cues.empty()) {
      out.rejected.push_back({text, FilterReason::NoCue, i});
      continue;
    }
    survivors.push_back({text, std::move(cues), i});
  }

  Rng rng(cfg.rng_seed);
  const auto picked = rng.sample_indices(survivors.size(), static_cast<std::size_t>(cfg.epsilon));
  std::size_t p = 0;
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    if (p < picked.size() && picked[p] == k) {
      out.kept.push_back(std::move(survivors[k]));
      ++p;
    } else {
      out.rejected.push_back({survivors[k].text, FilterReason::SampledOut, survivors[k].candidate});
    }
  }
  std::sort(out.rejected.begin(), out.rejected.end(),
            [](const RejectedSentence& a, const RejectedSentence& b) { return a.candidate < b.candidate; });
  return out;
}

FilteredSet filter_candidates(std::string_view original, const std::vector<std::string>& candidates,
                              const FilterConfig& cfg) {
  return filter_candidates(original, candidates, cfg, *make_lexicon_detector(cfg));
}

}  // namespace negforge
