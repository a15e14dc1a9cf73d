#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negforge/lexicon.hpp"

namespace negforge {

enum class DistanceUnit { Token, Char };
std::string_view to_string(DistanceUnit u);
DistanceUnit parse_distance_unit(std::string_view s);

/// Lowercase, trim, and strip any trailing run of sentence punctuation.
std::string normalize(std::string_view s);

/// Unit-cost insert/delete/substitute distance, two-row dynamic program.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Raw edit distance over whitespace tokens or UTF-8 code points.
std::size_t levenshtein(std::string_view a, std::string_view b, DistanceUnit unit);

/// levenshtein / max(len a, len b); 0 when both are empty.
double norm_levenshtein(std::string_view a, std::string_view b, DistanceUnit unit = DistanceUnit::Token);

/// A detected negation cue; offsets are byte offsets into the sentence.
struct CueSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string cue_text;
  CueClass cue_class = CueClass::Verbal;

  bool operator==(const CueSpan&) const = default;
};

class CueDetector {
 public:
  virtual ~CueDetector() = default;
  virtual std::vector<CueSpan> detect(std::string_view sentence) const = 0;
};

/// Lexicon and affix-morphology detector.
class LexiconCueDetector final : public CueDetector {
 public:
  explicit LexiconCueDetector(const CueLexicon& lexicon = CueLexicon::bundled(), bool enable_optional = false)
      : lexicon_(&lexicon), enable_optional_(enable_optional) {}

  std::vector<CueSpan> detect(std::string_view sentence) const override;

 private:
  const CueLexicon* lexicon_;
  bool enable_optional_;
};

/// Cues found by the bundled lexicon with optional cues disabled.
std::vector<CueSpan> detect_cues(std::string_view sentence);

struct FilterConfig {
  int epsilon = 10;
  double threshold = 0.5;  // strict: keep when distance < threshold
  DistanceUnit unit = DistanceUnit::Token;
  std::uint64_t rng_seed = 0;
  std::string cue_lexicon_path;  // empty = bundled
  bool enable_optional_cues = false;

  void validate() const;
};

enum class FilterReason { Empty, Duplicate, TooFar, NoCue, SampledOut };
std::string_view to_string(FilterReason r);

struct KeptSentence {
  std::string text;
  std::vector<CueSpan> cues;
  std::size_t candidate = 0;  // index into the candidate list
};

struct RejectedSentence {
  std::string text;
  FilterReason reason;
  std::size_t candidate = 0;
};

struct FilteredSet {
  std::string original;
  std::vector<KeptSentence> kept;          // candidate order
  std::vector<RejectedSentence> rejected;  // candidate order
};

/// Normalizes, drops empties and duplicates, keeps candidates closer than the
/// threshold that carry a cue, then samples epsilon of them uniformly.
FilteredSet filter_candidates(std::string_view original, const std::vector<std::string>& candidates,
                              const FilterConfig& cfg, const CueDetector& detector);

/// Same, with a lexicon detector built from cfg.
FilteredSet filter_candidates(std::string_view original, const std::vector<std::string>& candidates,
                              const FilterConfig& cfg);

/// Detector selected by cfg: bundled lexicon or the file at cue_lexicon_path.
std::unique_ptr<CueDetector> make_lexicon_detector(const FilterConfig& cfg);

}  // namespace negforge
