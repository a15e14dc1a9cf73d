#include "negforge/backend.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "negforge/text.hpp"

namespace negforge {

using nlohmann::json;

namespace {

const std::map<std::string, std::vector<std::string>, std::less<>>& aux_table() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> t{
      {"am", {"am not"}},
      {"are", {"aren't", "are not"}},
      {"can", {"can't", "cannot"}},
      {"could", {"couldn't", "could not"}},
      {"did", {"didn't", "did not"}},
      {"do", {"don't", "do not"}},
      {"does", {"doesn't", "does not"}},
      {"had", {"hadn't", "had not"}},
      {"has", {"hasn't", "has not"}},
      {"have", {"haven't", "have not"}},
      {"is", {"isn't", "is not"}},
      {"may", {"may not"}},
      {"might", {"might not"}},
      {"must", {"mustn't", "must not"}},
      {"shall", {"shall not"}},
      {"should", {"shouldn't", "should not"}},
      {"was", {"wasn't", "was not", "never was"}},
      {"were", {"weren't", "were not", "never were"}},
      {"will", {"won't", "will not"}},
      {"would", {"wouldn't", "would not"}},
  };
  return t;
}

const std::map<std::string, std::vector<std::string>, std::less<>>& quantifier_table() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> t{
      {"everybody", {"nobody", "no one"}}, {"everyone", {"no one", "nobody"}}, {"somebody", {"nobody", "no one"}},
      {"someone", {"no one", "nobody"}},   {"everything", {"nothing"}},        {"something", {"nothing"}},
  };
  return t;
}

const std::map<std::string, std::vector<std::string>, std::less<>>& adverb_table() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> t{
      {"always", {"never", "not always"}}, {"everywhere", {"nowhere"}},      {"somewhere", {"nowhere"}},
      {"often", {"rarely", "never"}},      {"sometimes", {"never"}},         {"usually", {"rarely", "never"}},
      {"already", {"not yet"}},            {"still", {"no longer"}},
  };
  return t;
}

const std::map<std::string, std::string, std::less<>>& irregular_past() {
  static const std::map<std::string, std::string, std::less<>> t{
      {"ate", "eat"},     {"became", "become"}, {"bought", "buy"},  {"brought", "bring"}, {"came", "come"},
      {"drove", "drive"}, {"felt", "feel"},     {"found", "find"},  {"gave", "give"},     {"got", "get"},
      {"knew", "know"},   {"left", "leave"},    {"lost", "lose"},   {"made", "make"},     {"met", "meet"},
      {"ran", "run"},     {"sang", "sing"},     {"sat", "sit"},     {"saw", "see"},       {"slept", "sleep"},
      {"spoke", "speak"}, {"stood", "stand"},   {"swam", "swim"},   {"took", "take"},     {"told", "tell"},
      {"thought", "think"}, {"went", "go"},     {"won", "win"},     {"wrote", "write"},   {"kept", "keep"},
  };
  return t;
}

const std::set<std::string, std::less<>> kDeterminers{"the", "a", "an", "some", "this", "that", "these", "those",
                                                      "my", "your", "his", "her", "its", "our", "their", "every",
                                                      "each", "all", "any", "several", "many"};
const std::set<std::string, std::less<>> kPrepositions{
    "in", "on", "at", "to", "for", "with", "despite", "of", "from", "into", "off", "by",
    "about", "under", "over", "near", "during", "after", "before", "through", "across", "behind"};
const std::set<std::string, std::less<>> kDegreeAdverbs{"very", "too", "quite", "so", "much", "really"};

bool ends_with(std::string_view s, std::string_view suf) {
  return s.size() >= suf.size() && s.substr(s.size() - suf.size()) == suf;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string plural(const std::string& noun) {
  static const std::map<std::string, std::string, std::less<>> irregular{
      {"man", "men"}, {"woman", "women"}, {"child", "children"}, {"person", "people"}, {"foot", "feet"},
      {"mouse", "mice"}, {"tooth", "teeth"}};
  const std::string lower = to_lower(noun);
  if (auto it = irregular.find(lower); it != irregular.end()) return match_initial_case(it->second, noun);
  if (ends_with(lower, "s") && !ends_with(lower, "ss") && !ends_with(lower, "us")) return noun;  // already plural
  if (ends_with(lower, "s") || ends_with(lower, "x") || ends_with(lower, "ch") || ends_with(lower, "sh")) {
    return noun + "es";
  }
  if (lower.size() > 1 && lower.back() == 'y' && !is_vowel(lower[lower.size() - 2])) {
    return noun.substr(0, noun.size() - 1) + "ies";
  }
  return noun + "s";
}

/// Lemma of a third-person -s form when it is a known stem.
std::optional<std::string> s_form_lemma(std::string_view w, const CueLexicon& lex) {
  if (w.size() < 4 || !ends_with(w, "s") || ends_with(w, "ss")) return std::nullopt;
  std::vector<std::string> cands;
  if (ends_with(w, "ies")) cands.push_back(std::string(w.substr(0, w.size() - 3)) + "y");
  if (ends_with(w, "es")) cands.emplace_back(w.substr(0, w.size() - 2));
  cands.emplace_back(w.substr(0, w.size() - 1));
  for (auto& c : cands) {
    if (lex.is_stem(c)) return c;
  }
  return std::nullopt;
}

/// Lemma of a past-tense form, regular or from the irregular table.
std::optional<std::string> past_lemma(std::string_view w, const CueLexicon& lex) {
  if (auto it = irregular_past().find(w); it != irregular_past().end()) return it->second;
  if (w.size() < 4 || !ends_with(w, "ed")) return std::nullopt;
  const std::string stem(w.substr(0, w.size() - 2));
  std::vector<std::string> cands;
  if (ends_with(w, "ied")) cands.push_back(std::string(w.substr(0, w.size() - 3)) + "y");
  if (stem.size() >= 2 && stem.back() == stem[stem.size() - 2]) cands.push_back(stem.substr(0, stem.size() - 1));
  cands.push_back(stem);
  cands.push_back(stem + "e");
  for (auto& c : cands) {
    if (c.size() >= 2 && lex.is_stem(c)) return c;
  }
  return std::nullopt;
}

enum class Tier { Aux, Quantifier, Adverb, Verb };

/// Variants for a single bare word restricted to one rule tier.
std::vector<std::string> word_variants(std::string_view lower, Tier tier, const CueLexicon& lex) {
  switch (tier) {
    case Tier::Aux:
      if (auto it = aux_table().find(lower); it != aux_table().end()) return it->second;
      return {};
    case Tier::Quantifier:
      if (auto it = quantifier_table().find(lower); it != quantifier_table().end()) return it->second;
      return {};
    case Tier::Adverb:
      if (auto it = adverb_table().find(lower); it != adverb_table().end()) return it->second;
      return {};
    case Tier::Verb: {
      const std::string w(lower);
      if (auto l = s_form_lemma(lower, lex)) return {"does not " + *l, "never " + w};
      if (auto l = past_lemma(lower, lex)) return {"did not " + *l, "never " + w};
      return {};
    }
  }
  return {};
}

/// Splits a word into leading punctuation, core, trailing punctuation.
struct WordParts {
  std::string lead, core, tail;
};

WordParts split_word(std::string_view w) {
  std::size_t b = 0, e = w.size();
  auto inner = [](char c) { return is_ascii_alnum(c) || c == '\'' || c == '-' || static_cast<unsigned char>(c) >= 0x80; };
  while (b < e && !inner(w[b])) ++b;
  while (e > b && !inner(w[e - 1])) --e;
  return {std::string(w.substr(0, b)), std::string(w.substr(b, e - b)), std::string(w.substr(e))};
}

/// Applies the first rule tier that matches any word, at its leftmost match.
std::vector<std::string> negate_sequence(const std::vector<std::string>& words, const CueLexicon& lex) {
  for (Tier tier : {Tier::Aux, Tier::Quantifier, Tier::Adverb, Tier::Verb}) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      const WordParts parts = split_word(words[i]);
      if (parts.core.empty()) continue;
      const auto vars = word_variants(to_lower(parts.core), tier, lex);
      if (vars.empty()) continue;
      std::vector<std::string> out;
      for (const auto& v : vars) {
        std::vector<std::string> copy = words;
        copy[i] = parts.lead + match_initial_case(v, parts.core) + parts.tail;
        out.push_back(join(copy, " "));
      }
      return out;
    }
  }
  return {};
}

const std::set<std::string, std::less<>> kBeForms{"am", "is", "are", "was", "were", "be", "been", "being"};
const std::set<std::string, std::less<>> kConjunctions{"and", "or", "but", "so", "because", "while", "when", "that"};

std::vector<std::string> negate_single(const std::string& w, const CueLexicon& lex, std::string_view prev) {
  const std::string lower = to_lower(w);
  for (Tier tier : {Tier::Aux, Tier::Quantifier, Tier::Adverb}) {
    auto v = word_variants(lower, tier, lex);
    if (!v.empty()) return v;
  }
  if (auto neg = lex.negated_form(lower)) return {"not " + w, *neg};
  if (auto v = word_variants(lower, Tier::Verb, lex); !v.empty()) return v;
  // Progressive participles only; "-ing" nouns ("meeting") stay untouched.
  if (lower.size() > 4 && ends_with(lower, "ing") && kBeForms.count(prev)) return {"not " + w};
  if (kDegreeAdverbs.count(lower) || (lower.size() > 4 && ends_with(lower, "ly"))) return {"not " + w};
  if (lex.is_stem(lower)) return {"not " + w};
  return {};
}

bool all_alpha(const std::vector<std::string>& words) {
  return std::all_of(words.begin(), words.end(), [](const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return is_ascii_alpha(c); });
  });
}

}  // namespace

void SamplingParams::validate() const {
  using K = BackendError::Kind;
  if (num_return < 1) throw BackendError(K::Parameter, "num_return must be >= 1");
  if (max_new_tokens < 1) throw BackendError(K::Parameter, "max_new_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw BackendError(K::Parameter, "temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw BackendError(K::Parameter, "top_p must lie in (0, 1]");
}

std::string_view to_string(BackendKind k) { return k == BackendKind::Remote ? "remote" : "offline"; }

BackendKind parse_backend_kind(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "remote") return BackendKind::Remote;
  if (l == "offline") return BackendKind::Offline;
  throw InvalidArgument("unknown backend kind '" + std::string(s) + "'");
}

void BackendDescriptor::validate() const {
  if (kind == BackendKind::Remote && endpoint_url.empty()) throw InvalidArgument("remote backend needs an endpoint URL");
  if (max_concurrency < 1 || max_concurrency > (1 << 16)) throw InvalidArgument("max_concurrency must be in [1, 65536]");
  if (max_attempts < 1 || max_attempts > 3) throw InvalidArgument("max_attempts must be in [1, 3]");
  if (timeout.count() <= 0) throw InvalidArgument("timeout must be positive");
}

void ScoredSequence::validate() const {
  if (tokens.size() != logprobs.size()) {
    throw BackendError(BackendError::Kind::Malformed, "tokens and logprobs differ in length");
  }
  for (double lp : logprobs) {
    if (!(lp <= 0.0)) throw BackendError(BackendError::Kind::Malformed, "log-probability above zero");
  }
}

bool BackendError::retryable() const {
  switch (kind_) {
    case Kind::Transport:
    case Kind::Timeout: return true;
    case Kind::Status: return status_ >= 500 || status_ == 429;
    default: return false;
  }
}

std::string_view to_string(BackendError::Kind k) {
  switch (k) {
    case BackendError::Kind::Transport: return "TRANSPORT";
    case BackendError::Kind::Timeout: return "TIMEOUT";
    case BackendError::Kind::Status: return "STATUS";
    case BackendError::Kind::Malformed: return "MALFORMED";
    case BackendError::Kind::Unsupported: return "UNSUPPORTED";
    case BackendError::Kind::Parameter: return "PARAMETER";
  }
  return "?";
}

std::vector<std::string> negate_span(std::string_view span, const CueLexicon& lexicon, std::string_view prev,
                                     std::string_view next) {
  const auto words = split_ws(span);
  if (words.empty()) return {};
  const std::string prev_l = to_lower(prev), next_l = to_lower(next);
  std::vector<std::string> out;
  if (words.size() == 1) {
    out = negate_single(words[0], lexicon, prev_l);
  } else {
    const std::string first = to_lower(words[0]);
    const std::vector<std::string> rest(words.begin() + 1, words.end());
    if (kDeterminers.count(first)) {
      out.push_back("no " + join(rest, " "));
      // Pluralize only when the phrase visibly ends here, so the last word is its noun.
      const bool phrase_ends = next_l.empty() || kPrepositions.count(next_l) || kConjunctions.count(next_l) ||
                               aux_table().count(next_l) || s_form_lemma(next_l, lexicon) ||
                               past_lemma(next_l, lexicon);
      if (rest.size() <= 2 && all_alpha(rest) && phrase_ends) {
        std::vector<std::string> pl = rest;
        pl.back() = plural(pl.back());
        out.push_back("none of the " + join(pl, " "));
      }
    } else if (kPrepositions.count(first)) {
      if (first == "with") out.push_back("without " + join(rest, " "));
      out.push_back("not " + std::string(trim(span)));
    } else {
      out = negate_sequence(words, lexicon);
    }
  }
  for (auto& v : out) v = match_initial_case(std::move(v), words[0]);
  return out;
}

std::vector<std::string> recover_span_texts(std::string_view original, std::string_view masked, std::string_view blank) {
  original = trim(original);
  masked = trim(masked);
  std::vector<std::string_view> segs;
  std::size_t pos = 0;
  for (auto b = masked.find(blank); b != std::string_view::npos; b = masked.find(blank, pos)) {
    segs.push_back(masked.substr(pos, b - pos));
    pos = b + blank.size();
  }
  segs.push_back(masked.substr(pos));
  if (segs.size() < 2) throw InvalidArgument("masked sentence has no blank");

  auto fail = [&]() { return InvalidArgument("masked sentence does not align with '" + std::string(original) + "'"); };
  if (original.substr(0, segs[0].size()) != segs[0]) throw fail();
  std::size_t p = segs[0].size();
  std::vector<std::string> spans;
  for (std::size_t i = 1; i < segs.size(); ++i) {
    std::size_t end;
    if (i + 1 == segs.size()) {
      if (original.size() < p + segs[i].size() + 1 || !ends_with(original, segs[i])) throw fail();
      end = original.size() - segs[i].size();
    } else {
      if (segs[i].empty()) throw fail();
      end = original.find(segs[i], p + 1);
      if (end == std::string_view::npos) throw fail();
    }
    const std::string_view span = trim(original.substr(p, end - p));
    if (span.empty()) throw fail();
    spans.emplace_back(span);
    p = end + segs[i].size();
  }
  return spans;
}

std::vector<std::string> offline_negate(std::string_view masked, const std::vector<std::string>& original_span_texts,
                                        const CueLexicon& lexicon, const SpecialTokens& toks) {
  const std::size_t blanks = count_occurrences(masked, toks.blank);
  if (blanks != original_span_texts.size()) {
    throw InvalidArgument("expected " + std::to_string(blanks) + " span texts, got " +
                          std::to_string(original_span_texts.size()));
  }
  // Literal text around each blank, for one word of context on either side.
  std::vector<std::string_view> segs;
  std::size_t pos = 0;
  for (auto b = masked.find(toks.blank); b != std::string_view::npos; b = masked.find(toks.blank, pos)) {
    segs.push_back(masked.substr(pos, b - pos));
    pos = b + toks.blank.size();
  }
  segs.push_back(masked.substr(pos));
  auto last_word = [](std::string_view seg) {
    const auto w = split_ws(seg);
    return w.empty() ? std::string() : split_word(w.back()).core;
  };
  auto first_word = [](std::string_view seg) {
    // Punctuation right after the blank closes the phrase.
    if (!seg.empty() && seg.front() != ' ') return std::string();
    const auto w = split_ws(seg);
    if (w.empty()) return std::string();
    const WordParts p = split_word(w.front());
    return p.lead.empty() ? p.core : std::string();
  };

  std::vector<std::string> out;
  for (std::size_t i = 0; i < original_span_texts.size(); ++i) {
    for (const auto& v :
         negate_span(original_span_texts[i], lexicon, last_word(segs[i]), first_word(segs[i + 1]))) {
      std::vector<std::string> answers;
      for (std::size_t j = 0; j < original_span_texts.size(); ++j) {
        answers.push_back(j == i ? v : std::string(trim(original_span_texts[j])));
      }
      out.push_back(format_answers(answers, toks));
    }
  }
  return out;
}

OfflineBackend::OfflineBackend(const CueLexicon& lexicon, SpecialTokens toks)
    : lexicon_(&lexicon), toks_(std::move(toks)) {
  toks_.validate();
  desc_.kind = BackendKind::Offline;
  desc_.capabilities = {Capability::Generate};
}

std::vector<std::string> OfflineBackend::generate(const PromptString& prompt, const SamplingParams& params) const {
  params.validate();
  const auto [original, masked] = split_prompt(prompt, toks_);
  std::vector<std::string> spans;
  try {
    spans = recover_span_texts(original, masked, toks_.blank);
  } catch (const InvalidArgument&) {
    return {};
  }
  auto all = offline_negate(masked, spans, *lexicon_, toks_);
  const auto n = static_cast<std::size_t>(params.num_return);
  if (all.size() <= n) return all;
  Rng rng(mix_seed(params.seed, stable_hash(prompt.text)));
  std::vector<std::string> out;
  for (std::size_t i : rng.sample_indices(all.size(), n)) out.push_back(std::move(all[i]));
  return out;
}

ScoredSequence OfflineBackend::score(std::string_view) const {
  throw BackendError(BackendError::Kind::Unsupported, "offline backend has no language model to score with");
}

namespace {

BackendDescriptor checked(BackendDescriptor d) {
  d.validate();
  return d;
}

std::string truncate_at_stop(std::string s, const std::vector<std::string>& stop) {
  std::size_t cut = s.size();
  for (const auto& st : stop) {
    if (st.empty()) continue;
    cut = std::min(cut, s.find(st));
  }
  s.resize(std::min(cut, s.size()));
  return s;
}

double jitter() {
  thread_local std::mt19937_64 gen{std::random_device{}()};
  return std::uniform_real_distribution<double>(0.5, 1.5)(gen);
}

}  // namespace

RemoteBackend::RemoteBackend(BackendDescriptor desc) : desc_(checked(std::move(desc))), slots_(desc_.max_concurrency) {
  static const std::regex url_re(R"(^(http://[^/?#]+)(/[^?#]*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(desc_.endpoint_url, m, url_re)) {
    throw InvalidArgument("endpoint URL must look like http://host[:port][/path], got '" + desc_.endpoint_url + "'");
  }
  scheme_host_port_ = m[1].str();
  path_prefix_ = m[2].str();
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string RemoteBackend::post_once(const std::string& path, const std::string& body) const {
  using K = BackendError::Kind;
  slots_.acquire();
  const int now = ++in_flight_;
  int seen = peak_.load();
  while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
  }
  struct Release {
    const RemoteBackend* self;
    ~Release() {
      --self->in_flight_;
      self->slots_.release();
    }
  } release{this};

  httplib::Client cli(scheme_host_port_);
  const auto t = desc_.timeout;
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(t));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(t));
  cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(t));
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Post(path_prefix_ + path, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const bool slow = std::chrono::steady_clock::now() - start >= t;
    const std::string what = "POST " + desc_.endpoint_url + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && slow)) {
      throw BackendError(K::Timeout, what);
    }
    throw BackendError(K::Transport, what);
  }
  if (res->status != 200) {
    throw BackendError(K::Status, "POST " + desc_.endpoint_url + path + ": HTTP " + std::to_string(res->status),
                       res->status);
  }
  return res->body;
}

std::string RemoteBackend::post_json(const std::string& path, const std::string& body) const {
  for (int attempt = 1;; ++attempt) {
    try {
      return post_once(path, body);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= desc_.max_attempts) throw;
      const double delay = static_cast<double>(desc_.retry_base_delay.count()) * (1 << (attempt - 1)) * jitter();
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }
  }
}

std::vector<std::string> RemoteBackend::generate(const PromptString& prompt, const SamplingParams& params) const {
  using K = BackendError::Kind;
  if (!has(Capability::Generate)) throw BackendError(K::Unsupported, "backend does not generate");
  params.validate();
  const json req{{"prompt", prompt.text},          {"n", params.num_return}, {"temperature", params.temperature},
                 {"top_p", params.top_p},          {"max_tokens", params.max_new_tokens},
                 {"stop", params.stop},            {"seed", params.seed}};
  const std::string body = post_json("/generate", req.dump());
  std::vector<std::string> out;
  try {
    const json resp = json::parse(body);
    for (const auto& c : resp.at("completions")) {
      if (out.size() >= static_cast<std::size_t>(params.num_return)) break;
      out.push_back(truncate_at_stop(c.get<std::string>(), params.stop));
    }
  } catch (const json::exception& e) {
    throw BackendError(K::Malformed, std::string("generate response: ") + e.what());
  }
  return out;
}

ScoredSequence RemoteBackend::score(std::string_view text) const {
  using K = BackendError::Kind;
  if (!has(Capability::Score)) throw BackendError(K::Unsupported, "backend does not advertise scoring");
  if (text.empty()) return {};
  const std::string body = post_json("/score", json{{"text", text}}.dump());
  ScoredSequence out;
  try {
    const json resp = json::parse(body);
    out.tokens = resp.at("tokens").get<std::vector<std::string>>();
    out.logprobs = resp.at("logprobs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw BackendError(K::Malformed, std::string("score response: ") + e.what());
  }
  out.validate();
  return out;
}

std::vector<CueSpan> RemoteBackend::cues(std::string_view text) const {
  using K = BackendError::Kind;
  const std::string body = post_json("/cues", json{{"text", text}}.dump());
  std::vector<CueSpan> out;
  try {
    const json resp = json::parse(body);
    for (const auto& c : resp.at("cues")) {
      const auto b = c.at("start").get<std::size_t>(), e = c.at("end").get<std::size_t>();
      if (b >= e || e > text.size()) throw BackendError(K::Malformed, "cue offsets out of range");
      out.push_back({b, e, std::string(text.substr(b, e - b)), parse_cue_class(c.at("class").get<std::string>())});
    }
  } catch (const json::exception& e) {
    throw BackendError(K::Malformed, std::string("cues response: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw BackendError(K::Malformed, std::string("cues response: ") + e.what());
  }
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  if (desc.kind == BackendKind::Offline) return std::make_unique<OfflineBackend>();
  return std::make_unique<RemoteBackend>(desc);
}

}  // namespace negforge
