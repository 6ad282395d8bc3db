#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace testsupport {

constexpr double kOracleNegInf = -std::numeric_limits<double>::infinity();

// Best segmentation score by exhaustive recursion over all coverings of
// cps[pos:] with the given pieces. Returns -inf when no covering exists.
inline double best_segmentation_score(
    const std::map<std::string, double>& pieces,
    const std::vector<std::string>& cps, size_t pos = 0) {
  if (pos == cps.size()) return 0.0;
  double best = kOracleNegInf;
  std::string acc;
  for (size_t end = pos; end < cps.size(); ++end) {
    acc += cps[end];
    auto it = pieces.find(acc);
    if (it == pieces.end()) continue;
    const double rest = best_segmentation_score(pieces, cps, end + 1);
    if (rest == kOracleNegInf) continue;
    const double score = it->second + rest;
    if (score > best) best = score;
  }
  return best;
}

// Log of the total probability mass over all segmentations (top-down with
// memoization), used to recompute EM training likelihoods independently.
inline double total_segmentation_loglik(
    const std::map<std::string, double>& pieces,
    const std::vector<std::string>& cps, size_t pos,
    std::map<size_t, double>& memo) {
  if (pos == cps.size()) return 0.0;
  auto hit = memo.find(pos);
  if (hit != memo.end()) return hit->second;
  double total = kOracleNegInf;
  std::string acc;
  for (size_t end = pos; end < cps.size(); ++end) {
    acc += cps[end];
    auto it = pieces.find(acc);
    if (it == pieces.end()) continue;
    const double rest = total_segmentation_loglik(pieces, cps, end + 1, memo);
    if (rest == kOracleNegInf) continue;
    const double path = it->second + rest;
    if (total == kOracleNegInf) {
      total = path;
    } else {
      const double m = total > path ? total : path;
      total = m + std::log(std::exp(total - m) + std::exp(path - m));
    }
  }
  memo[pos] = total;
  return total;
}

// Word-boundary preprocessing restated independently: splitting the line on
// single spaces and prefixing each (possibly empty) segment with U+2581.
inline std::vector<std::string> oracle_pretokens(const std::string& line) {
  std::vector<std::string> words;
  std::string cur = "\xe2\x96\x81";
  for (char c : line) {
    if (c == ' ') {
      words.push_back(cur);
      cur = "\xe2\x96\x81";
    } else {
      cur += c;
    }
  }
  words.push_back(cur);
  return words;
}

}  // namespace testsupport
