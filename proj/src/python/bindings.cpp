#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "negforge/pipeline.hpp"
#include "negforge/text.hpp"

namespace py = pybind11;
using namespace negforge;

namespace {

py::dict proposal_dict(const MaskProposal& p) {
  py::list spans;
  for (const auto& s : p.spans) {
    spans.append(py::dict(py::arg("start") = s.range.start, py::arg("end") = s.range.end,
                          py::arg("rule") = std::string(to_string(s.rule))));
  }
  return py::dict(py::arg("masked_text") = p.masked_text, py::arg("spans") = spans,
                  py::arg("granularity") = std::string(to_string(p.granularity)),
                  py::arg("terminal_blank") = p.terminal_blank);
}

py::dict cue_dict(const CueSpan& c) {
  return py::dict(py::arg("start") = c.start, py::arg("end") = c.end, py::arg("text") = c.cue_text,
                  py::arg("class") = std::string(to_string(c.cue_class)));
}

RunConfig config_from(const std::string& json_text) {
  RunConfig cfg;
  if (!json_text.empty()) apply_config_json(cfg, json_text);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "negforge C++ core";

  auto base = py::register_exception<Error>(m, "NegforgeError");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Token>(m, "Token")
      .def_readonly("index", &Token::index)
      .def_readonly("surface", &Token::surface)
      .def_readonly("upos", &Token::upos)
      .def_readonly("deprel", &Token::deprel)
      .def_readonly("head", &Token::head)
      .def_readonly("space_after", &Token::space_after)
      .def("__repr__", [](const Token& t) { return "<Token " + std::to_string(t.index) + " " + t.surface + ">"; });

  py::class_<DepSentence>(m, "DepSentence")
      .def_property_readonly("sent_id", &DepSentence::sent_id)
      .def_property_readonly("text", &DepSentence::raw_text)
      .def_property_readonly("tokens", &DepSentence::tokens)
      .def_property_readonly("root", &DepSentence::root)
      .def("__len__", &DepSentence::size)
      .def("to_conllu", [](const DepSentence& s) { return write_conllu(s); });

  m.def("parse_conllu", [](const std::string& text) { return parse_conllu(text); }, py::arg("text"));

  m.def(
      "match_rules",
      [](const DepSentence& s, const std::string& granularity) {
        std::vector<std::pair<int, std::string>> out;
        for (const auto& r : match_rules(s, parse_granularity(granularity)))
          out.emplace_back(r.index, std::string(to_string(r.rule)));
        return out;
      },
      py::arg("sentence"), py::arg("granularity") = "subtree");

  m.def(
      "propose_masks",
      [](const DepSentence& s, const std::string& granularity, int max_blanks, int max_proposals, bool whole,
         std::uint64_t seed) {
        MaskConfig cfg;
        cfg.granularity = parse_granularity(granularity);
        cfg.max_blanks_per_proposal = max_blanks;
        cfg.max_proposals = max_proposals;
        cfg.include_whole_sentence = whole;
        cfg.rng_seed = seed;
        py::list out;
        for (const auto& p : propose_masks(s, cfg)) out.append(proposal_dict(p));
        return out;
      },
      py::arg("sentence"), py::arg("granularity") = "token", py::arg("max_blanks") = 2, py::arg("max_proposals") = 6,
      py::arg("include_whole_sentence") = true, py::arg("seed") = 0);

  m.def(
      "build_prompt", [](const std::string& o, const std::string& masked) { return build_prompt(o, masked).text; },
      py::arg("original"), py::arg("masked"));
  m.def(
      "parse_completion",
      [](const std::string& raw, std::size_t blanks) {
        auto c = parse_completion(raw, blanks);
        return py::make_tuple(c.answers, std::string(to_string(c.reason)));
      },
      py::arg("raw"), py::arg("blank_count"));
  m.def("fill_blanks", &fill_blanks, py::arg("masked"), py::arg("answers"), py::arg("restore_initial_capital") = true,
        py::arg("blank") = "[BLANK]");

  m.def("normalize", &normalize, py::arg("text"));
  m.def(
      "levenshtein",
      [](const std::string& a, const std::string& b, const std::string& unit) {
        return levenshtein(a, b, parse_distance_unit(unit));
      },
      py::arg("a"), py::arg("b"), py::arg("unit") = "token");
  m.def(
      "norm_levenshtein",
      [](const std::string& a, const std::string& b, const std::string& unit) {
        return norm_levenshtein(a, b, parse_distance_unit(unit));
      },
      py::arg("a"), py::arg("b"), py::arg("unit") = "token");
  m.def(
      "detect_cues",
      [](const std::string& text, bool optional) {
        py::list out;
        for (const auto& c : LexiconCueDetector(CueLexicon::bundled(), optional).detect(text)) out.append(cue_dict(c));
        return out;
      },
      py::arg("text"), py::arg("enable_optional") = false);

  m.def(
      "filter_candidates",
      [](const std::string& original, const std::vector<std::string>& cands, int epsilon, double threshold,
         const std::string& unit, std::uint64_t seed, bool optional) {
        FilterConfig cfg;
        cfg.epsilon = epsilon;
        cfg.threshold = threshold;
        cfg.unit = parse_distance_unit(unit);
        cfg.rng_seed = seed;
        cfg.enable_optional_cues = optional;
        const auto res = filter_candidates(original, cands, cfg);
        py::list kept, rejected;
        for (const auto& k : res.kept) {
          py::list cues;
          for (const auto& c : k.cues) cues.append(cue_dict(c));
          kept.append(py::dict(py::arg("text") = k.text, py::arg("cues") = cues, py::arg("candidate") = k.candidate));
        }
        for (const auto& r : res.rejected) {
          rejected.append(py::dict(py::arg("text") = r.text, py::arg("reason") = std::string(to_string(r.reason)),
                                   py::arg("candidate") = r.candidate));
        }
        return py::dict(py::arg("kept") = kept, py::arg("rejected") = rejected);
      },
      py::arg("original"), py::arg("candidates"), py::arg("epsilon") = 10, py::arg("threshold") = 0.5,
      py::arg("unit") = "token", py::arg("seed") = 0, py::arg("enable_optional") = false);

  m.def(
      "negate_span",
      [](const std::string& span, const std::string& prev, const std::string& next) {
        return negate_span(span, CueLexicon::bundled(), prev, next);
      },
      py::arg("span"), py::arg("prev") = "", py::arg("next") = "");
  m.def(
      "offline_generate",
      [](const std::string& original, const std::string& masked, int num_return, std::uint64_t seed) {
        SamplingParams p;
        p.num_return = num_return;
        p.seed = seed;
        return OfflineBackend().generate(build_prompt(original, masked), p);
      },
      py::arg("original"), py::arg("masked"), py::arg("num_return") = 3, py::arg("seed") = 0);

  m.def(
      "tree_edit_distance",
      [](const std::string& a, const std::string& b) {
        return tree_edit_distance(LabeledTree::parse(a), LabeledTree::parse(b));
      },
      py::arg("a"), py::arg("b"), "Distance between trees in A(B,C) notation.");
  m.def(
      "sentence_bleu",
      [](const std::string& hyp, const std::vector<std::string>& refs, int max_n) {
        std::vector<std::vector<std::string>> r;
        for (const auto& s : refs) r.push_back(split_ws(s));
        return sentence_bleu(split_ws(hyp), r, max_n);
      },
      py::arg("hypothesis"), py::arg("references"), py::arg("max_n") = 4);
  m.def("self_bleu", &self_bleu, py::arg("sentences"), py::arg("max_n") = 4);
  m.def("perplexity", py::overload_cast<const std::vector<double>&>(&perplexity), py::arg("logprobs"));
  m.def(
      "nld_avg",
      [](const std::vector<std::pair<std::string, std::string>>& pairs, const std::string& unit) {
        return nld_avg(pairs, parse_distance_unit(unit));
      },
      py::arg("pairs"), py::arg("unit") = "token");

  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& in, const std::string& out, const std::string& config_json) {
        const RunConfig cfg = config_from(config_json);
        py::gil_scoped_release release;
        if (stage == "mask") return cmd_mask(cfg, in, out).to_string();
        if (stage == "filter") return cmd_filter(cfg, in, out).to_string();
        if (stage == "augment") {
          const auto backend = make_backend(cfg.backend);
          return cmd_augment(cfg, in, out, *backend).to_string();
        }
        if (stage == "eval") {
          std::unique_ptr<Backend> scorer;
          if (cfg.backend.kind == BackendKind::Remote) scorer = make_backend(cfg.backend);
          return cmd_eval(cfg, in, out, scorer.get()).to_json();
        }
        throw InvalidArgument("unknown stage '" + stage + "'");
      },
      py::arg("stage"), py::arg("input"), py::arg("output"), py::arg("config_json") = "",
      "Runs mask|augment|filter|eval over files. Returns the stage summary, or the report JSON for eval.");
}
