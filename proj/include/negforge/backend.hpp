#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "negforge/error.hpp"
#include "negforge/filter.hpp"
#include "negforge/lexicon.hpp"
#include "negforge/prompt.hpp"

namespace negforge {

struct SamplingParams {
  int num_return = 3;  // completions requested per prompt
  double temperature = 1.0;
  double top_p = 0.9;
  int max_new_tokens = 48;
  std::vector<std::string> stop{"<|endoftext|>"};
  std::uint64_t seed = 0;

  void validate() const;  // throws BackendError(Parameter)
};

enum class BackendKind { Remote, Offline };
enum class Capability { Generate, Score };
std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

struct BackendDescriptor {
  BackendKind kind = BackendKind::Offline;
  std::string endpoint_url;
  std::chrono::milliseconds timeout{30000};
  int max_concurrency = 4;
  std::set<Capability> capabilities{Capability::Generate};
  int max_attempts = 3;
  std::chrono::milliseconds retry_base_delay{200};

  void validate() const;  // throws InvalidArgument
};

struct ScoredSequence {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;  // natural log, aligned with tokens

  /// Throws BackendError(Malformed) on length mismatch or positive logprobs.
  void validate() const;
};

class BackendError : public Error {
 public:
  enum class Kind { Transport, Timeout, Status, Malformed, Unsupported, Parameter };

  BackendError(Kind kind, const std::string& what, int status = 0) : Error(what), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }
  /// Transport, timeout, 5xx and 429 responses are worth another attempt.
  bool retryable() const;

 private:
  Kind kind_;
  int status_;
};
std::string_view to_string(BackendError::Kind k);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;
  /// Raw completions, at most params.num_return, each cut at the first stop string.
  virtual std::vector<std::string> generate(const PromptString& prompt, const SamplingParams& params) const = 0;
  virtual ScoredSequence score(std::string_view text) const = 0;

  bool has(Capability c) const { return descriptor().capabilities.count(c) != 0; }
};

/// Rule-table fills for each blank of `masked`, one "{fill} [ANSWER]" string
/// per variant. With several blanks each variant negates one span and keeps
/// the others. Empty when no rule applies.
std::vector<std::string> offline_negate(std::string_view masked, const std::vector<std::string>& original_span_texts,
                                        const CueLexicon& lexicon = CueLexicon::bundled(),
                                        const SpecialTokens& toks = {});

/// Negated variants of a single span ("were" -> "weren't", "were not", ...).
/// `prev` and `next` are the words around the span, empty at a boundary.
std::vector<std::string> negate_span(std::string_view span, const CueLexicon& lexicon = CueLexicon::bundled(),
                                     std::string_view prev = {}, std::string_view next = {});

/// Texts hidden behind each blank, recovered by aligning the masked sentence
/// with the original. Throws InvalidArgument when they do not align.
std::vector<std::string> recover_span_texts(std::string_view original, std::string_view masked,
                                            std::string_view blank = "[BLANK]");

/// Deterministic generator built on offline_negate. No scoring model.
class OfflineBackend final : public Backend {
 public:
  explicit OfflineBackend(const CueLexicon& lexicon = CueLexicon::bundled(), SpecialTokens toks = {});

  const BackendDescriptor& descriptor() const override { return desc_; }
  std::vector<std::string> generate(const PromptString& prompt, const SamplingParams& params) const override;
  ScoredSequence score(std::string_view text) const override;

 private:
  const CueLexicon* lexicon_;
  SpecialTokens toks_;
  BackendDescriptor desc_;
};

/// JSON-over-HTTP client: POST {base}/generate, {base}/score, {base}/cues.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendDescriptor desc);

  const BackendDescriptor& descriptor() const override { return desc_; }
  std::vector<std::string> generate(const PromptString& prompt, const SamplingParams& params) const override;
  ScoredSequence score(std::string_view text) const override;
  std::vector<CueSpan> cues(std::string_view text) const;

  /// Highest number of requests observed in flight at once.
  int peak_in_flight() const { return peak_.load(); }

 private:
  std::string post_json(const std::string& path, const std::string& body) const;
  std::string post_once(const std::string& path, const std::string& body) const;

  BackendDescriptor desc_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  mutable std::counting_semaphore<1 << 16> slots_;
  mutable std::atomic<int> in_flight_{0};
  mutable std::atomic<int> peak_{0};
};

/// Cue detection delegated to the remote service's /cues endpoint.
class RemoteCueDetector final : public CueDetector {
 public:
  explicit RemoteCueDetector(const RemoteBackend& backend) : backend_(&backend) {}
  std::vector<CueSpan> detect(std::string_view sentence) const override { return backend_->cues(sentence); }

 private:
  const RemoteBackend* backend_;
};

/// Backend for a descriptor: OfflineBackend or RemoteBackend.
std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc);

}  // namespace negforge
