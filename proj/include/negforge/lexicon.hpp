#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace negforge {

enum class CueClass { Verbal, NonVerbal, Affixal, Multiword };
std::string_view to_string(CueClass c);
CueClass parse_cue_class(std::string_view s);

/// Cue lexicon plus the English stem list used to validate affix stripping.
///
/// Lexicon text is `CLASS<TAB>cue` per line with `#` comments. Besides the
/// four cue classes it understands OPTIONAL (multiword cue, off by default),
/// EXCLUDE (word or phrase that never counts), PREFIX and SUFFIX.
class CueLexicon {
 public:
  enum class PhraseKind { Cue, Optional, Exclude };
  struct Phrase {
    std::vector<std::string> words;
    PhraseKind kind;
  };

  /// Throws InvalidArgument on malformed lines or unknown classes.
  static CueLexicon parse(std::string_view lexicon_tsv, std::string_view stem_list);
  /// Lexicon file from disk, bundled stem list.
  static CueLexicon from_file(const std::string& path);
  static const CueLexicon& bundled();

  /// Class of a single-word entry (lowercase lookup).
  std::optional<CueClass> word_class(std::string_view lower) const;
  bool is_excluded(std::string_view lower) const { return excluded_.count(std::string(lower)) != 0; }
  bool is_stem(std::string_view lower) const { return stems_.count(std::string(lower)) != 0; }
  /// Phrases sorted longest first.
  const std::vector<Phrase>& phrases() const { return phrases_; }

  /// If `lower` is an affixal negation, the positive base it negates.
  std::optional<std::string> affixal_base(std::string_view lower) const;
  /// Known affixal negation of a positive word ("comfortable" ->
  /// "uncomfortable", "useful" -> "useless").
  std::optional<std::string> negated_form(std::string_view lower) const;

  /// Whether a (possibly inflected) remainder reduces to a known stem.
  bool reduces_to_stem(std::string_view rest) const;

 private:
  std::optional<std::string> strip_affix(std::string_view lower) const;

  std::unordered_map<std::string, CueClass> words_;
  std::unordered_set<std::string> excluded_;
  std::unordered_set<std::string> stems_;
  std::vector<Phrase> phrases_;
  std::vector<std::string> prefixes_;
  std::vector<std::string> suffixes_;
  std::unordered_map<std::string, std::string> negated_;  // base -> affixal form
  std::vector<std::string> affixal_order_;
};

namespace bundled {
extern const char* const kCueLexicon;
extern const char* const kStemList;
}  // namespace bundled

}  // namespace negforge
