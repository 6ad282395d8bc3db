#pragma once

// Exhaustive reference search over every terminated sequence up to max_len
// generated tokens, scored the same way decoding ranks hypotheses. Used to
// check beam search on small spaces.

#include <cmath>
#include <functional>
#include <vector>

namespace testsupport {

struct BestHyp {
  std::vector<int> ids;
  double raw = 0.0;
  double norm = 0.0;
  bool truncated = false;
  bool valid = false;
};

using StepFn = std::function<std::vector<double>(const std::vector<int>&)>;

inline void oracle_visit(const StepFn& step, int vocab, int eos,
                         std::vector<int>& prefix, double raw, int max_len,
                         double lenpen, BestHyp& best) {
  const std::vector<double> lp = step(prefix);
  auto consider = [&](double r, bool truncated) {
    std::vector<int> ids(prefix.begin() + 1, prefix.end());
    ids.push_back(eos);
    const double norm = r / std::pow(static_cast<double>(ids.size()), lenpen);
    bool better = false;
    if (!best.valid) {
      better = true;
    } else if (norm != best.norm) {
      better = norm > best.norm;
    } else if (r != best.raw) {
      better = r > best.raw;
    } else {
      better = ids < best.ids;
    }
    if (better) best = {std::move(ids), r, norm, truncated, true};
  };

  const int generated = static_cast<int>(prefix.size()) - 1;
  if (generated == max_len - 1) {
    consider(raw + lp[static_cast<size_t>(eos)], true);
    return;
  }
  for (int v = 0; v < vocab; ++v) {
    if (v == eos) {
      consider(raw + lp[static_cast<size_t>(v)], false);
    } else {
      prefix.push_back(v);
      oracle_visit(step, vocab, eos, prefix, raw + lp[static_cast<size_t>(v)],
                   max_len, lenpen, best);
      prefix.pop_back();
    }
  }
}

inline BestHyp exhaustive_best(const StepFn& step, int vocab, int eos,
                               int seed_token, int max_len, double lenpen) {
  std::vector<int> prefix = {seed_token};
  BestHyp best;
  oracle_visit(step, vocab, eos, prefix, 0.0, max_len, lenpen, best);
  return best;
}

}  // namespace testsupport
