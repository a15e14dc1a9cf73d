#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "negforge/backend.hpp"
#include "negforge/error.hpp"
#include "negforge/filter.hpp"
#include "negforge/mask.hpp"
#include "negforge/metrics.hpp"
#include "negforge/prompt.hpp"
#include "negforge/syntax.hpp"

namespace negforge {

/// Unreadable input or unwritable output.
class IoError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  MaskConfig mask;
  SamplingParams sampling;
  FilterConfig filter;
  BackendDescriptor backend;
  SpecialTokens tokens;
  std::uint64_t global_seed = 0;
  int threads = 1;
  bool normalized_ted = false;
  int bleu_max_n = 4;
  bool remote_cues = false;  // use the backend's /cues endpoint instead of the lexicon

  /// Throws InvalidArgument when any sub-config is invalid.
  void validate() const;
};

/// Overlays a JSON config document on `cfg`. Unknown keys are errors.
void apply_config_json(RunConfig& cfg, std::string_view json_text);
RunConfig load_config_file(const std::string& path, RunConfig base = {});
std::string config_to_json(const RunConfig& cfg);

/// global_seed xor the stable hash of the sentence id.
std::uint64_t sentence_seed(const RunConfig& cfg, std::string_view sent_id);

struct StageSummary {
  std::size_t records = 0;
  std::size_t errors = 0;
  std::size_t proposals = 0;
  std::size_t completions = 0;
  std::size_t candidates = 0;
  std::size_t kept = 0;
  std::size_t resumed = 0;  // records skipped because an earlier run wrote them
  std::map<std::string, std::size_t> reasons;

  void merge(const StageSummary& o);
  std::string to_string() const;
};

// Single-record transforms. Each takes and returns one JSON object on one line.

std::string mask_record(const DepSentence& sent, const RunConfig& cfg, StageSummary* summary = nullptr);
std::string augment_record(std::string_view line, const RunConfig& cfg, const Backend& backend,
                           const CueDetector& detector, StageSummary* summary = nullptr);
std::string filter_record(std::string_view line, const RunConfig& cfg, const CueDetector& detector,
                          StageSummary* summary = nullptr);
SentenceMetrics eval_record(std::string_view line, const RunConfig& cfg, const Backend* scorer = nullptr);

/// Runs fn(i) for i in [0, n) on up to `threads` workers and hands results to
/// sink in index order. If some fn(i) throws, no later index is started, the
/// completed prefix is still delivered, and the first failure is rethrown.
void ordered_parallel(std::size_t n, int threads, const std::function<std::optional<std::string>(std::size_t)>& fn,
                      const std::function<void(std::size_t, const std::optional<std::string>&)>& sink);

// File-level stages. Paths may be "-" for stdin/stdout.

/// Input is CoNLL-U, or JSONL whose records carry a "conllu" block.
StageSummary cmd_mask(const RunConfig& cfg, const std::string& in_path, const std::string& out_path);
/// Writes incrementally; keeps "<out>.cursor" until the run completes so a
/// rerun skips records already written. BackendError propagates.
StageSummary cmd_augment(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                         const Backend& backend);
StageSummary cmd_filter(const RunConfig& cfg, const std::string& in_path, const std::string& out_path);
/// Writes the JSON report to out_path; returns it for table printing.
EvalReport cmd_eval(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                    const Backend* scorer, StageSummary* summary = nullptr);

/// Detector chosen by the config: lexicon, or the remote /cues endpoint.
std::unique_ptr<CueDetector> make_detector(const RunConfig& cfg, const Backend* backend);

}  // namespace negforge
