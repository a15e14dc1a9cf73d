#include "negforge/prompt.hpp"

#include "negforge/error.hpp"
#include "negforge/text.hpp"

namespace negforge {

namespace {

std::string single_line(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return std::string(trim(out));
}

bool is_linguistic(char32_t c) {
  if (c >= 0x80) return true;  // letters of other scripts, typographic apostrophes
  const char a = static_cast<char>(c);
  return is_ascii_alnum(a) || a == '\'' || a == '-' || a == ' ';
}

}  // namespace

void SpecialTokens::validate() const {
  const std::vector<const std::string*> all{&blank, &sep, &answer, &empty, &perturb, &neg_code, &eos};
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i]->empty()) throw InvalidArgument("special tokens must be non-empty");
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i != j && all[i]->find(*all[j]) != std::string::npos) {
        throw InvalidArgument("special token '" + *all[j] + "' overlaps '" + *all[i] + "'");
      }
    }
  }
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

PromptString build_prompt(std::string_view original, std::string_view masked, const SpecialTokens& toks) {
  if (count_occurrences(masked, toks.blank) == 0) throw InvalidArgument("masked sentence has no blank");
  return {single_line(original) + ' ' + toks.perturb + ' ' + toks.neg_code + ' ' + single_line(masked) + ' ' +
          toks.sep};
}

std::pair<std::string, std::string> split_prompt(const PromptString& prompt, const SpecialTokens& toks) {
  const std::string marker = ' ' + toks.perturb + ' ' + toks.neg_code + ' ';
  const std::string tail = ' ' + toks.sep;
  const std::string& t = prompt.text;
  auto m = t.find(marker);
  if (m == std::string::npos || t.size() < tail.size() || t.compare(t.size() - tail.size(), tail.size(), tail) != 0) {
    throw InvalidArgument("not a negation prompt: " + t);
  }
  std::string original = t.substr(0, m);
  const std::size_t mstart = m + marker.size();
  if (t.size() - tail.size() < mstart) throw InvalidArgument("not a negation prompt: " + t);
  std::string masked = t.substr(mstart, t.size() - tail.size() - mstart);
  return {std::move(original), std::move(masked)};
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "NONE";
    case RejectReason::CountMismatch: return "COUNT_MISMATCH";
    case RejectReason::DegenerateSymbols: return "DEGENERATE_SYMBOLS";
    case RejectReason::EmptyRaw: return "EMPTY_RAW";
  }
  return "?";
}

bool is_degenerate_answer(std::string_view answer) {
  if (answer.empty()) return false;
  const auto cps = utf8_codepoints(answer);
  std::size_t good = 0;
  for (char32_t c : cps) good += is_linguistic(c) ? 1 : 0;
  if (static_cast<double>(good) < 0.4 * static_cast<double>(cps.size())) return true;

  // A unit of >= 3 characters repeated back to back at least 4 times.
  const std::size_t n = cps.size();
  for (std::size_t unit = 3; unit * 4 <= n; ++unit) {
    std::size_t run = 0;  // consecutive i with cps[i] == cps[i + unit]
    for (std::size_t i = 0; i + unit < n; ++i) {
      run = cps[i] == cps[i + unit] ? run + 1 : 0;
      if (run >= 3 * unit) {
        const std::size_t start = i + 1 - run;
        bool blank_unit = true;
        for (std::size_t k = start; k < start + unit; ++k) blank_unit = blank_unit && cps[k] == U' ';
        if (!blank_unit) return true;
      }
    }
  }
  return false;
}

CompletionParse parse_completion(std::string_view raw, std::size_t blank_count, const SpecialTokens& toks) {
  CompletionParse out;
  if (auto eos = raw.find(toks.eos); eos != std::string_view::npos) raw = raw.substr(0, eos);
  if (trim(raw).empty()) {
    out.reason = RejectReason::EmptyRaw;
    return out;
  }
  std::vector<std::string> pieces;
  std::size_t pos = 0;
  bool saw_marker = false;
  while (true) {
    auto m = raw.find(toks.answer, pos);
    if (m == std::string_view::npos) {
      pieces.emplace_back(trim(raw.substr(pos)));
      break;
    }
    saw_marker = true;
    pieces.emplace_back(trim(raw.substr(pos, m - pos)));
    pos = m + toks.answer.size();
  }
  if (saw_marker && pieces.back().empty()) pieces.pop_back();

  for (auto& p : pieces) {
    if (p == toks.empty) {
      p.clear();
      continue;
    }
    const bool leaked = p.find(toks.blank) != std::string::npos || p.find(toks.sep) != std::string::npos;
    if (leaked || is_degenerate_answer(p)) {
      out.reason = RejectReason::DegenerateSymbols;
      return out;
    }
  }
  if (pieces.size() != blank_count) {
    out.reason = RejectReason::CountMismatch;
    return out;
  }
  out.answers = std::move(pieces);
  return out;
}

std::string format_answers(const std::vector<std::string>& answers, const SpecialTokens& toks) {
  std::string out;
  for (const auto& a : answers) {
    out += a.empty() ? toks.empty : a;
    out += ' ' + toks.answer + ' ';
  }
  return std::string(trim(out));
}

std::string fill_blanks(std::string_view masked, const std::vector<std::string>& answers, bool restore_initial_capital,
                        std::string_view blank) {
  const std::size_t blanks = count_occurrences(masked, blank);
  if (blanks != answers.size()) {
    throw InvalidArgument("expected " + std::to_string(blanks) + " answers, got " + std::to_string(answers.size()));
  }
  masked = trim(masked);
  std::string out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const std::size_t b = masked.find(blank, pos);
    out.append(masked.substr(pos, b - pos));
    pos = b + blank.size();
    std::string fill(trim(answers[i]));
    if (fill.empty()) {
      if (!out.empty() && out.back() == ' ') {
        out.pop_back();
      } else if (pos < masked.size() && masked[pos] == ' ') {
        ++pos;
      }
      continue;
    }
    if (i == 0 && b == 0 && restore_initial_capital) fill = capitalize_first(std::move(fill));
    out += fill;
  }
  out.append(masked.substr(pos));
  return std::string(trim(out));
}

}  // namespace negforge
