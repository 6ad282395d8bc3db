#include "mt/bleu.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "mt/error.hpp"

namespace mt {

namespace {

void replace_all(std::string& s, const std::string& from,
                 const std::string& to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Symbol set split unconditionally: the ASCII ranges 0x20-0x26, 0x28-0x2B,
// 0x3A-0x40, 0x5B-0x60, 0x7B-0x7E plus '/'. Apostrophe, comma, period,
// dash, digits, and letters are not in the set.
bool is_split_symbol(unsigned char c) {
  return (c >= 0x20 && c <= 0x26) || (c >= 0x28 && c <= 0x2B) || c == 0x2F ||
         (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Each pass scans left to right without rescanning its own output,
// mirroring non-overlapping regex substitution.

std::string split_symbols(const std::string& s) {
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    if (is_split_symbol(c)) {
      out += ' ';
      out += static_cast<char>(c);
      out += ' ';
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

// "X." / "X," with X a non-digit -> "X . " / "X , ".
std::string split_period_comma_after(const std::string& s) {
  std::string out;
  out.reserve(s.size() * 2);
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char a = s[i];
    if (i + 1 < s.size() && !is_digit(a) &&
        (s[i + 1] == '.' || s[i + 1] == ',')) {
      out += static_cast<char>(a);
      out += ' ';
      out += s[i + 1];
      out += ' ';
      i += 2;
    } else {
      out += static_cast<char>(a);
      ++i;
    }
  }
  return out;
}

// ".X" / ",X" with X a non-digit -> " . X" / " , X".
std::string split_period_comma_before(const std::string& s) {
  std::string out;
  out.reserve(s.size() * 2);
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char a = s[i];
    if ((a == '.' || a == ',') && i + 1 < s.size() &&
        !is_digit(static_cast<unsigned char>(s[i + 1]))) {
      out += ' ';
      out += static_cast<char>(a);
      out += ' ';
      out += s[i + 1];
      i += 2;
    } else {
      out += static_cast<char>(a);
      ++i;
    }
  }
  return out;
}

// digit followed by '-' -> digit, space, '-'.
std::string split_digit_dash(const std::string& s) {
  std::string out;
  out.reserve(s.size() * 2);
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char a = s[i];
    if (is_digit(a) && i + 1 < s.size() && s[i + 1] == '-') {
      out += static_cast<char>(a);
      out += ' ';
      out += '-';
      i += 2;
    } else {
      out += static_cast<char>(a);
      ++i;
    }
  }
  return out;
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::vector<std::string> tokenize_13a(const std::string& text) {
  std::string line = text;
  replace_all(line, "<skipped>", "");
  replace_all(line, "-\n", "");
  replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all(line, "&quot;", "\"");
    replace_all(line, "&amp;", "&");
    replace_all(line, "&lt;", "<");
    replace_all(line, "&gt;", ">");
  }
  line = " " + line + " ";
  line = split_symbols(line);
  line = split_period_comma_after(line);
  line = split_period_comma_before(line);
  line = split_digit_dash(line);

  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_ascii_space(line[i])) ++i;
    size_t start = i;
    while (i < line.size() && !is_ascii_space(line[i])) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

namespace {

// N-grams keyed by tokens joined with an unlikely separator byte.
std::unordered_map<std::string, size_t> ngram_counts(
    const std::vector<std::string>& tokens, size_t n) {
  std::unordered_map<std::string, size_t> counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (size_t k = 0; k < n; ++k) {
      if (k) key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references,
                       BleuSmoothing smoothing) {
  if (hypotheses.size() != references.size()) {
    std::ostringstream os;
    os << "corpus_bleu needs equal list lengths, got " << hypotheses.size()
       << " hypotheses and " << references.size() << " references";
    throw data_error(os.str());
  }
  if (hypotheses.empty()) {
    throw data_error("corpus_bleu needs a non-empty corpus");
  }

  std::array<size_t, 4> matches{};
  std::array<size_t, 4> totals{};
  size_t hyp_len = 0;
  size_t ref_len = 0;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = tokenize_13a(hypotheses[s]);
    const auto ref = tokenize_13a(references[s]);
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (size_t n = 1; n <= 4; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      const auto ref_counts = ngram_counts(ref, n);
      size_t clipped = 0;
      size_t total = 0;
      for (const auto& [gram, count] : hyp_counts) {
        total += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) {
          clipped += std::min(count, it->second);
        }
      }
      matches[n - 1] += clipped;
      totals[n - 1] += total;
    }
  }

  BleuReport report;
  report.hyp_length = hyp_len;
  report.ref_length = ref_len;
  report.signature = std::string("mtlab-bleu-v1|tok:13a|n:4|smooth:") +
                     (smoothing == BleuSmoothing::eps ? "eps" : "none") +
                     "|refs:1";

  if (hyp_len == 0) {
    report.brevity_penalty = 0.0;
    report.bleu = 0.0;
    return report;
  }
  report.brevity_penalty =
      hyp_len > ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) /
                               static_cast<double>(hyp_len));

  bool any_zero = false;
  for (size_t n = 0; n < 4; ++n) {
    if (totals[n] == 0) {
      report.precisions[n] = 0.0;
      any_zero = true;
      continue;
    }
    if (matches[n] == 0) {
      if (smoothing == BleuSmoothing::eps) {
        report.precisions[n] = 0.1 / static_cast<double>(totals[n]);
      } else {
        report.precisions[n] = 0.0;
        any_zero = true;
      }
    } else {
      report.precisions[n] = static_cast<double>(matches[n]) /
                             static_cast<double>(totals[n]);
    }
  }

  if (any_zero) {
    report.bleu = 0.0;
    return report;
  }
  double log_sum = 0.0;
  for (size_t n = 0; n < 4; ++n) log_sum += std::log(report.precisions[n]);
  report.bleu = 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

std::string format_report(const BleuReport& report) {
  std::ostringstream os;
  os << std::fixed;
  os << "BLEU = " << std::setprecision(2) << report.bleu << ' ';
  for (size_t n = 0; n < 4; ++n) {
    if (n) os << '/';
    os << std::setprecision(1) << 100.0 * report.precisions[n];
  }
  os << " (BP = " << std::setprecision(3) << report.brevity_penalty
     << " hyp_len = " << report.hyp_length
     << " ref_len = " << report.ref_length << ") " << report.signature;
  return os.str();
}

}  // namespace mt
