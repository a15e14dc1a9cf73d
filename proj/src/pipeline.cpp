#include "negforge/pipeline.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "negforge/text.hpp"

namespace negforge {

using ojson = nlohmann::ordered_json;

namespace {

std::mutex g_log_mu;

void warn(const std::string& msg) {
  std::lock_guard<std::mutex> lk(g_log_mu);
  std::cerr << "negforge: " << msg << '\n';
}

std::string read_all(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

std::vector<std::string> nonblank_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!trim(line).empty()) out.emplace_back(trim(line));
    pos = nl + 1;
  }
  return out;
}

/// Output sink over a file or stdout.
class Output {
 public:
  Output(const std::string& path, bool append) : path_(path) {
    if (path == "-") return;
    file_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!file_) throw IoError("cannot write '" + path + "'");
  }
  void line(const std::string& s) {
    std::ostream& os = path_ == "-" ? std::cout : static_cast<std::ostream&>(file_);
    os << s << '\n';
    os.flush();
    if (!os) throw IoError("error writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream file_;
};

ojson parse_record(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw InvalidArgument(std::string("malformed JSON record: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("JSONL record is not an object");
  return j;
}

std::string record_id(const ojson& j) {
  if (auto it = j.find("sent_id"); it != j.end() && it->is_string()) return it->get<std::string>();
  return "?";
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from == to || from.empty()) return s;
  for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) {
    s.replace(p, from.size(), to);
  }
  return s;
}

ojson proposal_json(const MaskProposal& p) {
  ojson spans = ojson::array();
  for (const auto& s : p.spans) {
    spans.push_back({{"start", s.range.start}, {"end", s.range.end}, {"rule", to_string(s.rule)}});
  }
  return {{"masked_text", p.masked_text},
          {"spans", spans},
          {"granularity", to_string(p.granularity)},
          {"terminal_blank", p.terminal_blank}};
}

std::vector<MaskedSpan> proposal_spans(const ojson& p) {
  std::vector<MaskedSpan> out;
  for (const auto& s : p.at("spans")) {
    out.push_back({{s.at("start").get<int>(), s.at("end").get<int>()}, parse_rule_id(s.at("rule").get<std::string>())});
  }
  return out;
}

ojson cue_json(const CueSpan& c) {
  return {{"start", c.start}, {"end", c.end}, {"text", c.cue_text}, {"class", to_string(c.cue_class)}};
}

/// Runs the filter over candidates and renders the "filtered" object.
ojson filtered_json(const std::string& original, const std::vector<std::string>& cands,
                    const std::vector<ojson>& sources, const FilterConfig& fc, const CueDetector& detector,
                    StageSummary* summary) {
  const FilteredSet fs = filter_candidates(original, cands, fc, detector);
  ojson kept = ojson::array(), rejected = ojson::array();
  for (const auto& k : fs.kept) {
    ojson cues = ojson::array();
    for (const auto& c : k.cues) cues.push_back(cue_json(c));
    kept.push_back({{"text", k.text}, {"cues", cues}, {"source", sources[k.candidate]}});
  }
  for (const auto& r : fs.rejected) {
    rejected.push_back({{"text", r.text}, {"reason", to_string(r.reason)}, {"source", sources[r.candidate]}});
    if (summary) ++summary->reasons[std::string(to_string(r.reason))];
  }
  if (summary) {
    summary->candidates += cands.size();
    summary->kept += fs.kept.size();
  }
  return {{"kept", kept}, {"rejected", rejected}};
}

FilterConfig filter_config_for(const RunConfig& cfg, std::uint64_t seed) {
  FilterConfig fc = cfg.filter;
  fc.rng_seed = mix_seed(seed, 2);
  return fc;
}

template <typename T>
void read_opt(const ojson& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void check_keys(const ojson& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument("config: '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw InvalidArgument("config: unknown key '" + where + "." + k + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  mask.validate();
  try {
    sampling.validate();
  } catch (const BackendError& e) {
    throw InvalidArgument(e.what());
  }
  filter.validate();
  backend.validate();
  tokens.validate();
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
  if (bleu_max_n < 1) throw InvalidArgument("bleu max_n must be >= 1");
}

void apply_config_json(RunConfig& cfg, std::string_view json_text) {
  ojson j;
  try {
    j = ojson::parse(json_text);
    check_keys(j, {"seed", "threads", "mask", "sampling", "filter", "backend", "eval", "tokens"}, "");
    read_opt(j, "seed", cfg.global_seed);
    read_opt(j, "threads", cfg.threads);
    if (auto m = j.find("mask"); m != j.end()) {
      check_keys(*m, {"granularity", "max_blanks_per_proposal", "max_proposals", "include_whole_sentence", "rules"},
                 "mask");
      if (m->contains("granularity")) cfg.mask.granularity = parse_granularity(m->at("granularity").get<std::string>());
      read_opt(*m, "max_blanks_per_proposal", cfg.mask.max_blanks_per_proposal);
      read_opt(*m, "max_proposals", cfg.mask.max_proposals);
      read_opt(*m, "include_whole_sentence", cfg.mask.include_whole_sentence);
      if (m->contains("rules")) {
        cfg.mask.enabled_rules.clear();
        for (const auto& r : m->at("rules")) cfg.mask.enabled_rules.insert(parse_rule_id(r.get<std::string>()));
      }
    }
    if (auto s = j.find("sampling"); s != j.end()) {
      check_keys(*s, {"num_return", "temperature", "top_p", "max_new_tokens", "stop"}, "sampling");
      read_opt(*s, "num_return", cfg.sampling.num_return);
      read_opt(*s, "temperature", cfg.sampling.temperature);
      read_opt(*s, "top_p", cfg.sampling.top_p);
      read_opt(*s, "max_new_tokens", cfg.sampling.max_new_tokens);
      read_opt(*s, "stop", cfg.sampling.stop);
    }
    if (auto f = j.find("filter"); f != j.end()) {
      check_keys(*f, {"epsilon", "threshold", "unit", "cue_lexicon_path", "enable_optional_cues", "detector"},
                 "filter");
      read_opt(*f, "epsilon", cfg.filter.epsilon);
      read_opt(*f, "threshold", cfg.filter.threshold);
      if (f->contains("unit")) cfg.filter.unit = parse_distance_unit(f->at("unit").get<std::string>());
      read_opt(*f, "cue_lexicon_path", cfg.filter.cue_lexicon_path);
      read_opt(*f, "enable_optional_cues", cfg.filter.enable_optional_cues);
      if (f->contains("detector")) {
        const std::string d = f->at("detector").get<std::string>();
        if (d != "lexicon" && d != "remote") throw InvalidArgument("config: filter.detector must be lexicon|remote");
        cfg.remote_cues = d == "remote";
      }
    }
    if (auto b = j.find("backend"); b != j.end()) {
      check_keys(*b, {"kind", "url", "timeout_ms", "max_concurrency", "capabilities", "retry_base_delay_ms",
                      "max_attempts"},
                 "backend");
      if (b->contains("kind")) cfg.backend.kind = parse_backend_kind(b->at("kind").get<std::string>());
      read_opt(*b, "url", cfg.backend.endpoint_url);
      if (b->contains("timeout_ms")) cfg.backend.timeout = std::chrono::milliseconds(b->at("timeout_ms").get<long>());
      read_opt(*b, "max_concurrency", cfg.backend.max_concurrency);
      read_opt(*b, "max_attempts", cfg.backend.max_attempts);
      if (b->contains("retry_base_delay_ms")) {
        cfg.backend.retry_base_delay = std::chrono::milliseconds(b->at("retry_base_delay_ms").get<long>());
      }
      if (b->contains("capabilities")) {
        cfg.backend.capabilities.clear();
        for (const auto& c : b->at("capabilities")) {
          const std::string s = to_lower(c.get<std::string>());
          if (s == "generate") {
            cfg.backend.capabilities.insert(Capability::Generate);
          } else if (s == "score") {
            cfg.backend.capabilities.insert(Capability::Score);
          } else {
            throw InvalidArgument("config: unknown capability '" + s + "'");
          }
        }
      }
    }
    if (auto e = j.find("eval"); e != j.end()) {
      check_keys(*e, {"normalized_ted", "bleu_max_n"}, "eval");
      read_opt(*e, "normalized_ted", cfg.normalized_ted);
      read_opt(*e, "bleu_max_n", cfg.bleu_max_n);
    }
    if (auto t = j.find("tokens"); t != j.end()) {
      check_keys(*t, {"blank", "sep", "answer", "empty", "perturb", "neg_code", "eos"}, "tokens");
      read_opt(*t, "blank", cfg.tokens.blank);
      read_opt(*t, "sep", cfg.tokens.sep);
      read_opt(*t, "answer", cfg.tokens.answer);
      read_opt(*t, "empty", cfg.tokens.empty);
      read_opt(*t, "perturb", cfg.tokens.perturb);
      read_opt(*t, "neg_code", cfg.tokens.neg_code);
      read_opt(*t, "eos", cfg.tokens.eos);
    }
  } catch (const ojson::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  apply_config_json(base, read_all(path));
  return base;
}

std::string config_to_json(const RunConfig& cfg) {
  ojson rules = ojson::array();
  for (RuleId r : cfg.mask.enabled_rules) rules.push_back(to_string(r));
  ojson caps = ojson::array();
  for (Capability c : cfg.backend.capabilities) caps.push_back(c == Capability::Generate ? "generate" : "score");
  ojson j{
      {"seed", cfg.global_seed},
      {"threads", cfg.threads},
      {"mask",
       {{"granularity", to_string(cfg.mask.granularity)},
        {"max_blanks_per_proposal", cfg.mask.max_blanks_per_proposal},
        {"max_proposals", cfg.mask.max_proposals},
        {"include_whole_sentence", cfg.mask.include_whole_sentence},
        {"rules", rules}}},
      {"sampling",
       {{"num_return", cfg.sampling.num_return},
        {"temperature", cfg.sampling.temperature},
        {"top_p", cfg.sampling.top_p},
        {"max_new_tokens", cfg.sampling.max_new_tokens},
        {"stop", cfg.sampling.stop}}},
      {"filter",
       {{"epsilon", cfg.filter.epsilon},
        {"threshold", cfg.filter.threshold},
        {"unit", to_string(cfg.filter.unit)},
        {"cue_lexicon_path", cfg.filter.cue_lexicon_path},
        {"enable_optional_cues", cfg.filter.enable_optional_cues},
        {"detector", cfg.remote_cues ? "remote" : "lexicon"}}},
      {"backend",
       {{"kind", to_string(cfg.backend.kind)},
        {"url", cfg.backend.endpoint_url},
        {"timeout_ms", cfg.backend.timeout.count()},
        {"max_concurrency", cfg.backend.max_concurrency},
        {"capabilities", caps},
        {"retry_base_delay_ms", cfg.backend.retry_base_delay.count()},
        {"max_attempts", cfg.backend.max_attempts}}},
      {"eval", {{"normalized_ted", cfg.normalized_ted}, {"bleu_max_n", cfg.bleu_max_n}}},
      {"tokens",
       {{"blank", cfg.tokens.blank},
        {"sep", cfg.tokens.sep},
        {"answer", cfg.tokens.answer},
        {"empty", cfg.tokens.empty},
        {"perturb", cfg.tokens.perturb},
        {"neg_code", cfg.tokens.neg_code},
        {"eos", cfg.tokens.eos}}},
  };
  return j.dump(2);
}

std::uint64_t sentence_seed(const RunConfig& cfg, std::string_view sent_id) {
  return cfg.global_seed ^ stable_hash(sent_id);
}

void StageSummary::merge(const StageSummary& o) {
  records += o.records;
  errors += o.errors;
  proposals += o.proposals;
  completions += o.completions;
  candidates += o.candidates;
  kept += o.kept;
  resumed += o.resumed;
  for (const auto& [k, v] : o.reasons) reasons[k] += v;
}

std::string StageSummary::to_string() const {
  std::ostringstream os;
  os << records << (records == 1 ? " sentence" : " sentences");
  if (errors) os << ", " << errors << " skipped on error";
  if (resumed) os << ", " << resumed << " already done";
  if (proposals) os << ", " << proposals << " proposals";
  if (completions) os << ", " << completions << " completions";
  if (candidates) os << ", " << candidates << " candidates, " << kept << " kept";
  for (const auto& [k, v] : reasons) os << ", " << k << "=" << v;
  return os.str();
}

std::string mask_record(const DepSentence& sent, const RunConfig& cfg, StageSummary* summary) {
  MaskConfig mc = cfg.mask;
  mc.rng_seed = sentence_seed(cfg, sent.sent_id());
  const auto props = propose_masks(sent, mc);
  ojson arr = ojson::array();
  for (const auto& p : props) arr.push_back(proposal_json(p));
  if (summary) {
    ++summary->records;
    summary->proposals += props.size();
  }
  ojson j{{"sent_id", sent.sent_id()}, {"text", sent.raw_text()}, {"conllu", write_conllu(sent)}, {"proposals", arr}};
  return j.dump();
}

std::string augment_record(std::string_view line, const RunConfig& cfg, const Backend& backend,
                           const CueDetector& detector, StageSummary* summary) {
  ojson rec = parse_record(line);
  const std::string sent_id = record_id(rec);
  try {
    const std::string text = rec.at("text").get<std::string>();
    const std::uint64_t seed = sentence_seed(cfg, sent_id);
    std::optional<DepSentence> sent;
    if (rec.contains("conllu")) {
      auto parsed = parse_conllu(rec.at("conllu").get<std::string>());
      if (!parsed.empty()) sent = std::move(parsed.front());
    }
    const bool capital = !trim(text).empty() && is_ascii_upper(trim(text).front());
    const SpecialTokens& toks = cfg.tokens;

    ojson generations = ojson::array();
    std::vector<std::string> cands;
    std::vector<ojson> sources;
    const auto& props = rec.at("proposals");
    for (std::size_t pi = 0; pi < props.size(); ++pi) {
      const std::string masked = replace_all(props[pi].at("masked_text").get<std::string>(), kBlank, toks.blank);
      const std::size_t blanks = count_occurrences(masked, toks.blank);
      std::vector<std::string> span_texts;
      if (sent) {
        for (const auto& s : proposal_spans(props[pi])) span_texts.push_back(span_text(*sent, s.range));
      }
      const PromptString prompt = build_prompt(text, masked, toks);
      SamplingParams params = cfg.sampling;
      params.seed = mix_seed(seed, 1000 + pi);
      const auto raws = backend.generate(prompt, params);

      ojson cj = ojson::array(), rj = ojson::array();
      for (const auto& raw : raws) {
        const CompletionParse cp = parse_completion(raw, blanks, toks);
        if (!cp.ok()) {
          rj.push_back({{"raw", raw}, {"reason", to_string(cp.reason)}});
          if (summary) ++summary->reasons[std::string(to_string(cp.reason))];
          continue;
        }
        bool runaway = false;
        for (std::size_t i = 0; i < cp.answers.size() && i < span_texts.size(); ++i) {
          runaway = runaway || cp.answers[i].size() > 3 * std::max<std::size_t>(1, span_texts[i].size());
        }
        const std::string filled = fill_blanks(masked, cp.answers, capital, toks.blank);
        cj.push_back({{"answers", cp.answers}, {"text", filled}, {"runaway", runaway}});
        sources.push_back({{"proposal", pi}, {"candidate", cj.size() - 1}});
        cands.push_back(filled);
      }
      if (summary) summary->completions += raws.size();
      generations.push_back({{"proposal", pi}, {"prompt", prompt.text}, {"raw_completions", raws},
                             {"candidates", cj}, {"rejects", rj}});
    }
    rec["generations"] = generations;
    rec["filtered"] = filtered_json(text, cands, sources, filter_config_for(cfg, seed), detector, summary);
    if (summary) ++summary->records;
    if (rec["filtered"]["kept"].empty() && summary) ++summary->reasons["NO_KEPT"];
  } catch (const ojson::exception& e) {
    throw InvalidArgument("sentence '" + sent_id + "': " + e.what());
  }
  return rec.dump();
}

std::string filter_record(std::string_view line, const RunConfig& cfg, const CueDetector& detector,
                          StageSummary* summary) {
  ojson rec = parse_record(line);
  const std::string sent_id = record_id(rec);
  try {
    const std::string text = rec.at("text").get<std::string>();
    std::vector<std::string> cands;
    std::vector<ojson> sources;
    if (rec.contains("generations")) {
      for (const auto& g : rec.at("generations")) {
        const auto& cs = g.at("candidates");
        for (std::size_t ci = 0; ci < cs.size(); ++ci) {
          cands.push_back(cs[ci].at("text").get<std::string>());
          sources.push_back({{"proposal", g.at("proposal")}, {"candidate", ci}});
        }
      }
    } else if (rec.contains("candidates")) {
      const auto& cs = rec.at("candidates");
      for (std::size_t ci = 0; ci < cs.size(); ++ci) {
        cands.push_back(cs[ci].get<std::string>());
        sources.push_back({{"candidate", ci}});
      }
    } else {
      throw InvalidArgument("sentence '" + sent_id + "': record has neither generations nor candidates");
    }
    rec["filtered"] =
        filtered_json(text, cands, sources, filter_config_for(cfg, sentence_seed(cfg, sent_id)), detector, summary);
    if (summary) ++summary->records;
  } catch (const ojson::exception& e) {
    throw InvalidArgument("sentence '" + sent_id + "': " + e.what());
  }
  return rec.dump();
}

SentenceMetrics eval_record(std::string_view line, const RunConfig& cfg, const Backend* scorer) {
  const ojson rec = parse_record(line);
  const std::string sent_id = record_id(rec);
  SentenceMetrics m;
  try {
    const std::string text = rec.at("text").get<std::string>();
    if (!rec.contains("filtered")) throw InvalidArgument("sentence '" + sent_id + "': record has no filtered set");
    std::optional<DepSentence> orig;
    if (rec.contains("conllu")) {
      auto parsed = parse_conllu(rec.at("conllu").get<std::string>());
      if (!parsed.empty()) orig = std::move(parsed.front());
    }
    const bool can_score = scorer && scorer->has(Capability::Score);
    const std::string norm_orig = normalize(text);
    std::vector<std::string> kept_texts;
    for (const auto& k : rec.at("filtered").at("kept")) {
      const std::string kt = k.at("text").get<std::string>();
      kept_texts.push_back(kt);
      m.nld.push_back(norm_levenshtein(normalize(kt), norm_orig, cfg.filter.unit));

      std::optional<DepSentence> neg;
      if (k.contains("conllu")) {
        auto parsed = parse_conllu(k.at("conllu").get<std::string>());
        if (!parsed.empty()) neg = std::move(parsed.front());
      } else if (orig && k.contains("source") && k.at("source").contains("proposal") && rec.contains("generations") &&
                 rec.contains("proposals")) {
        const std::size_t pi = k.at("source").at("proposal").get<std::size_t>();
        const std::size_t ci = k.at("source").at("candidate").get<std::size_t>();
        std::vector<SpanRange> spans;
        for (const auto& s : proposal_spans(rec.at("proposals").at(pi))) spans.push_back(s.range);
        const auto answers =
            rec.at("generations").at(pi).at("candidates").at(ci).at("answers").get<std::vector<std::string>>();
        try {
          neg = project_parse(*orig, spans, answers);
        } catch (const Error&) {
          neg.reset();
        }
      }
      if (orig && neg) {
        const LabeledTree a = sentence_tree(*orig), b = sentence_tree(*neg);
        m.syntactic.push_back(cfg.normalized_ted ? normalized_tree_edit_distance(a, b)
                                                 : static_cast<double>(tree_edit_distance(a, b)));
      } else {
        ++m.skipped["syntactic_no_parse"];
      }

      if (can_score) {
        try {
          const ScoredSequence sc = scorer->score(kt);
          if (sc.logprobs.empty()) {
            ++m.skipped["ppl_empty"];
          } else {
            m.ppl.push_back(perplexity(sc));
          }
        } catch (const BackendError& e) {
          warn("sentence '" + sent_id + "': scoring failed: " + e.what());
          ++m.skipped["ppl_error"];
        }
      }
    }
    if (kept_texts.empty()) ++m.skipped["no_kept"];
    m.self_bleu = self_bleu(kept_texts, cfg.bleu_max_n);
    if (!m.self_bleu) ++m.skipped["self_bleu_small_set"];
  } catch (const ojson::exception& e) {
    throw InvalidArgument("sentence '" + sent_id + "': " + e.what());
  }
  return m;
}

void ordered_parallel(std::size_t n, int threads, const std::function<std::optional<std::string>(std::size_t)>& fn,
                      const std::function<void(std::size_t, const std::optional<std::string>&)>& sink) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) sink(i, fn(i));
    return;
  }
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::optional<std::optional<std::string>>> results(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::size_t fail_idx = n;
  std::exception_ptr failure;
  int running = std::min<int>(threads, static_cast<int>(n));

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        auto r = fn(i);
        std::lock_guard<std::mutex> lk(mu);
        results[i] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (i < fail_idx) {
          fail_idx = i;
          failure = std::current_exception();
        }
        stop = true;
      }
      cv.notify_all();
    }
    std::lock_guard<std::mutex> lk(mu);
    --running;
    cv.notify_all();
  };

  std::vector<std::thread> pool;
  const int nthreads = running;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);

  std::size_t written = 0;
  std::exception_ptr sink_failure;
  while (written < n) {
    std::optional<std::string> item;
    {
      std::unique_lock<std::mutex> lk(mu);
      cv.wait(lk, [&] { return results[written].has_value() || running == 0; });
      if (!results[written].has_value()) break;
      item = std::move(*results[written]);
      results[written].reset();
    }
    if (!sink_failure) {
      try {
        sink(written, item);
      } catch (...) {
        sink_failure = std::current_exception();
        stop = true;
      }
    }
    ++written;
  }
  for (auto& t : pool) t.join();
  if (sink_failure) std::rethrow_exception(sink_failure);
  if (failure) std::rethrow_exception(failure);
}

std::unique_ptr<CueDetector> make_detector(const RunConfig& cfg, const Backend* backend) {
  if (cfg.remote_cues) {
    const auto* remote = dynamic_cast<const RemoteBackend*>(backend);
    if (!remote) throw InvalidArgument("remote cue detection needs a remote backend");
    return std::make_unique<RemoteCueDetector>(*remote);
  }
  return make_lexicon_detector(cfg.filter);
}

StageSummary cmd_mask(const RunConfig& cfg, const std::string& in_path, const std::string& out_path) {
  cfg.validate();
  const std::string text = read_all(in_path);
  StageSummary summary;

  // Sentences are parsed one block at a time so a bad block skips only itself.
  struct Block {
    std::string text;
    std::size_t first_line;
    std::size_t ordinal;
  };
  std::vector<Block> blocks;
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool jsonl = first != std::string::npos && text[first] == '{';
  if (jsonl) {
    std::size_t ln = 0, ord = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      ++ln;
      const std::string_view line = trim(std::string_view(text).substr(pos, nl - pos));
      if (!line.empty()) blocks.push_back({std::string(line), ln, ++ord});
      pos = nl + 1;
    }
  } else {
    std::size_t ln = 0, ord = 0, start_line = 0;
    std::string cur;
    std::size_t pos = 0;
    auto flush = [&] {
      if (!trim(cur).empty()) blocks.push_back({cur, start_line, ++ord});
      cur.clear();
    };
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      ++ln;
      const std::string_view line = std::string_view(text).substr(pos, nl - pos);
      if (trim(line).empty()) {
        flush();
      } else {
        if (cur.empty()) start_line = ln;
        cur.append(line).push_back('\n');
      }
      pos = nl + 1;
    }
    flush();
  }

  std::vector<std::optional<DepSentence>> sents(blocks.size());
  std::set<std::string> seen;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    try {
      std::string conllu = blocks[b].text;
      std::string fallback_id = "s" + std::to_string(blocks[b].ordinal);
      if (jsonl) {
        const ojson j = parse_record(blocks[b].text);
        conllu = j.at("conllu").get<std::string>();
        if (j.contains("sent_id")) fallback_id = j.at("sent_id").get<std::string>();
      }
      auto parsed = parse_conllu(conllu);
      if (parsed.size() != 1) throw InvalidArgument("expected one sentence per block");
      DepSentence s = std::move(parsed.front());
      if (conllu.find("# sent_id") == std::string::npos) {
        s = DepSentence(s.tokens(), fallback_id, s.raw_text());
      }
      if (!seen.insert(s.sent_id()).second) throw InvalidArgument("duplicate sent_id '" + s.sent_id() + "'");
      sents[b] = std::move(s);
    } catch (const ParseError& e) {
      const std::size_t line = jsonl ? blocks[b].first_line : blocks[b].first_line + (e.line() ? e.line() - 1 : 0);
      warn(in_path + ":" + std::to_string(line) + ": " + e.what());
      ++summary.errors;
    } catch (const std::exception& e) {
      warn(in_path + ":" + std::to_string(blocks[b].first_line) + ": " + e.what());
      ++summary.errors;
    }
  }

  Output out(out_path, false);
  std::vector<StageSummary> parts(sents.size());
  ordered_parallel(
      sents.size(), cfg.threads,
      [&](std::size_t i) -> std::optional<std::string> {
        if (!sents[i]) return std::nullopt;
        try {
          return mask_record(*sents[i], cfg, &parts[i]);
        } catch (const Error& e) {
          warn("sentence '" + sents[i]->sent_id() + "': " + e.what());
          ++parts[i].errors;
          return std::nullopt;
        }
      },
      [&](std::size_t, const std::optional<std::string>& line) {
        if (line) out.line(*line);
      });
  for (const auto& p : parts) summary.merge(p);
  return summary;
}

StageSummary cmd_augment(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                         const Backend& backend) {
  cfg.validate();
  const auto lines = nonblank_lines(read_all(in_path));
  const auto detector = make_detector(cfg, &backend);
  StageSummary summary;

  const bool to_file = out_path != "-";
  const std::string cursor = out_path + ".cursor";
  std::set<std::string> done;
  bool resume = false;
  if (to_file && std::filesystem::exists(cursor) && std::filesystem::exists(out_path)) {
    for (const auto& l : nonblank_lines(read_all(out_path))) {
      try {
        done.insert(record_id(parse_record(l)));
      } catch (const InvalidArgument&) {
        // A torn final line from an interrupted write is rewritten below.
      }
    }
    resume = true;
  }
  if (resume) {
    // Drop any torn tail so appends start on a clean line.
    std::string kept;
    for (const auto& l : nonblank_lines(read_all(out_path))) {
      try {
        parse_record(l);
        kept += l + '\n';
      } catch (const InvalidArgument&) {
      }
    }
    std::ofstream rewrite(out_path, std::ios::binary | std::ios::trunc);
    rewrite << kept;
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string id;
    try {
      id = record_id(parse_record(lines[i]));
    } catch (const InvalidArgument&) {
    }
    if (resume && done.count(id)) {
      ++summary.resumed;
    } else {
      todo.push_back(i);
    }
  }

  Output out(out_path, resume);
  std::size_t written = 0;
  auto write_cursor = [&] {
    if (!to_file) return;
    std::ofstream c(cursor, std::ios::binary | std::ios::trunc);
    c << ojson{{"output", out_path}, {"completed", summary.resumed + written}}.dump() << '\n';
    if (!c) throw IoError("cannot write '" + cursor + "'");
  };
  write_cursor();

  std::vector<StageSummary> parts(todo.size());
  ordered_parallel(
      todo.size(), cfg.threads,
      [&](std::size_t k) -> std::optional<std::string> {
        try {
          return augment_record(lines[todo[k]], cfg, backend, *detector, &parts[k]);
        } catch (const BackendError&) {
          throw;
        } catch (const Error& e) {
          warn("record " + std::to_string(todo[k] + 1) + ": " + e.what());
          ++parts[k].errors;
          return std::nullopt;
        }
      },
      [&](std::size_t, const std::optional<std::string>& line) {
        if (line) out.line(*line);
        ++written;
        write_cursor();
      });
  for (const auto& p : parts) summary.merge(p);
  if (to_file) std::filesystem::remove(cursor);
  return summary;
}

StageSummary cmd_filter(const RunConfig& cfg, const std::string& in_path, const std::string& out_path) {
  cfg.validate();
  const auto lines = nonblank_lines(read_all(in_path));
  const auto detector = make_lexicon_detector(cfg.filter);
  StageSummary summary;
  Output out(out_path, false);
  std::vector<StageSummary> parts(lines.size());
  ordered_parallel(
      lines.size(), cfg.threads,
      [&](std::size_t i) -> std::optional<std::string> {
        try {
          return filter_record(lines[i], cfg, *detector, &parts[i]);
        } catch (const Error& e) {
          warn("record " + std::to_string(i + 1) + ": " + e.what());
          ++parts[i].errors;
          return std::nullopt;
        }
      },
      [&](std::size_t, const std::optional<std::string>& line) {
        if (line) out.line(*line);
      });
  for (const auto& p : parts) summary.merge(p);
  return summary;
}

EvalReport cmd_eval(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                    const Backend* scorer, StageSummary* summary) {
  cfg.validate();
  const auto lines = nonblank_lines(read_all(in_path));
  std::vector<std::optional<SentenceMetrics>> per(lines.size());
  std::size_t errors = 0;
  ordered_parallel(
      lines.size(), cfg.threads,
      [&](std::size_t i) -> std::optional<std::string> {
        try {
          per[i] = eval_record(lines[i], cfg, scorer);
        } catch (const Error& e) {
          warn("record " + std::to_string(i + 1) + ": " + e.what());
        }
        return std::nullopt;
      },
      [&](std::size_t i, const std::optional<std::string>&) {
        if (!per[i]) ++errors;
      });
  std::vector<SentenceMetrics> ok;
  for (auto& p : per) {
    if (p) ok.push_back(std::move(*p));
  }
  EvalReport report = build_report(ok, scorer && scorer->has(Capability::Score));
  if (errors) report.skipped["record_error"] += errors;
  Output out(out_path, false);
  out.line(report.to_json());
  if (summary) {
    summary->records += ok.size();
    summary->errors += errors;
  }
  return report;
}

}  // namespace negforge
