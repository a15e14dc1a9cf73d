// negforge: mask -> augment -> filter -> eval over CoNLL-U / JSONL corpora.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "negforge/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kBackend = 3 };

struct Flags {
  std::string config;
  std::string input = "-";
  std::string output = "-";
  std::string report;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend_url;
  std::optional<std::string> granularity;
  std::optional<int> epsilon;
  std::optional<double> threshold;
  std::optional<std::string> unit;
  std::optional<int> num_return;
  std::optional<int> threads;
  std::optional<std::string> cue_lexicon;
  bool offline = false;
  bool enable_lack_of = false;
  bool normalized_ted = false;
};

void add_common(CLI::App* cmd, Flags& f, bool generation) {
  cmd->add_option("-i,--input", f.input, "Input path, '-' for stdin");
  cmd->add_option("-o,--output", f.output, "Output path, '-' for stdout");
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Global seed");
  cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--granularity", f.granularity, "token|subtree")->check(CLI::IsMember({"token", "subtree"}));
  cmd->add_option("--epsilon", f.epsilon, "Negations kept per sentence");
  cmd->add_option("--threshold", f.threshold, "Normalized Levenshtein bound B");
  cmd->add_option("--unit", f.unit, "token|char")->check(CLI::IsMember({"token", "char"}));
  cmd->add_option("--cue-lexicon", f.cue_lexicon, "Cue lexicon TSV")->check(CLI::ExistingFile);
  cmd->add_flag("--enable-lack-of", f.enable_lack_of, "Count the optional multiword cues");
  cmd->add_option("--backend-url", f.backend_url, "Generation service base URL");
  cmd->add_flag("--offline", f.offline, "Use the built-in rule-table negator");
  if (generation) cmd->add_option("--num-return", f.num_return, "Completions per prompt");
}

negforge::RunConfig resolve_config(const Flags& f) {
  using namespace negforge;
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_config_file(f.config, cfg);
  if (const char* env = std::getenv("NEGFORGE_BACKEND_URL"); env && *env) {
    cfg.backend.endpoint_url = env;
    cfg.backend.kind = BackendKind::Remote;
  }
  if (f.seed) cfg.global_seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.granularity) cfg.mask.granularity = parse_granularity(*f.granularity);
  if (f.epsilon) cfg.filter.epsilon = *f.epsilon;
  if (f.threshold) cfg.filter.threshold = *f.threshold;
  if (f.unit) cfg.filter.unit = parse_distance_unit(*f.unit);
  if (f.num_return) cfg.sampling.num_return = *f.num_return;
  if (f.cue_lexicon) cfg.filter.cue_lexicon_path = *f.cue_lexicon;
  if (f.enable_lack_of) cfg.filter.enable_optional_cues = true;
  if (f.normalized_ted) cfg.normalized_ted = true;
  if (f.backend_url) {
    cfg.backend.endpoint_url = *f.backend_url;
    cfg.backend.kind = BackendKind::Remote;
  }
  if (f.offline) cfg.backend.kind = BackendKind::Offline;
  cfg.validate();
  return cfg;
}

void print_report(const negforge::EvalReport& r, const std::string& out) {
  (out == "-" ? std::cerr : std::cout) << r.to_table();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace negforge;
  CLI::App app{"Negation augmentation over dependency-parsed corpora"};
  app.require_subcommand(1);
  Flags f;

  auto* mask = app.add_subcommand("mask", "Propose masked spans for each parsed sentence");
  add_common(mask, f, false);
  auto* augment = app.add_subcommand("augment", "Generate, parse, fill and filter negations");
  add_common(augment, f, true);
  auto* filter = app.add_subcommand("filter", "Re-filter generated candidates");
  add_common(filter, f, false);
  auto* eval = app.add_subcommand("eval", "Closeness, syntactic and diversity report");
  add_common(eval, f, false);
  eval->add_flag("--normalized-ted", f.normalized_ted, "Divide tree edit distance by tree size");
  auto* run = app.add_subcommand("run", "mask, augment and eval in one pass");
  add_common(run, f, true);
  run->add_option("--report", f.report, "Report path (default: <output>.report.json)");
  run->add_flag("--normalized-ted", f.normalized_ted, "Divide tree edit distance by tree size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const RunConfig cfg = resolve_config(f);
    if (mask->parsed()) {
      const auto s = cmd_mask(cfg, f.input, f.output);
      std::cerr << "negforge mask: " << s.to_string() << '\n';
    } else if (augment->parsed()) {
      const auto backend = make_backend(cfg.backend);
      const auto s = cmd_augment(cfg, f.input, f.output, *backend);
      std::cerr << "negforge augment: " << s.to_string() << '\n';
    } else if (filter->parsed()) {
      const auto s = cmd_filter(cfg, f.input, f.output);
      std::cerr << "negforge filter: " << s.to_string() << '\n';
    } else if (eval->parsed()) {
      std::unique_ptr<Backend> scorer;
      if (cfg.backend.kind == BackendKind::Remote) scorer = make_backend(cfg.backend);
      print_report(cmd_eval(cfg, f.input, f.output, scorer.get()), f.output);
    } else if (run->parsed()) {
      if (f.output == "-") throw InvalidArgument("run needs -o/--output");
      const std::string report = f.report.empty() ? f.output + ".report.json" : f.report;
      const std::string masked = f.output + ".masked.tmp";
      const auto backend = make_backend(cfg.backend);
      const auto ms = cmd_mask(cfg, f.input, masked);
      std::cerr << "negforge mask: " << ms.to_string() << '\n';
      const auto as = cmd_augment(cfg, masked, f.output, *backend);
      std::filesystem::remove(masked);
      std::cerr << "negforge augment: " << as.to_string() << '\n';
      const Backend* scorer = cfg.backend.kind == BackendKind::Remote ? backend.get() : nullptr;
      print_report(cmd_eval(cfg, f.output, report, scorer), report);
    }
  } catch (const IoError& e) {
    std::cerr << "negforge: " << e.what() << '\n';
    return kIo;
  } catch (const BackendError& e) {
    std::cerr << "negforge: backend " << to_string(e.kind()) << ": " << e.what() << '\n';
    return e.kind() == BackendError::Kind::Parameter ? kUsage : kBackend;
  } catch (const Error& e) {
    std::cerr << "negforge: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
