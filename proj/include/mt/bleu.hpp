#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mt {

struct BleuReport {
  double bleu = 0.0;                          // 0..100
  std::array<double, 4> precisions{};         // clipped p1..p4
  double brevity_penalty = 1.0;
  size_t hyp_length = 0;                      // total hypothesis tokens
  size_t ref_length = 0;                      // total reference tokens
  std::string signature;
};

// Language-agnostic tokenization in the mteval-13a family. The exact rule
// table lives in docs/file-formats.md and is frozen by golden-file tests:
// skip-marker/entity normalization, symbol splitting, digit-aware period,
// comma and dash splitting, then whitespace collapse.
std::vector<std::string> tokenize_13a(const std::string& text);

enum class BleuSmoothing { none, eps };

// Corpus BLEU over detokenized text, single reference per hypothesis.
// With smoothing none, any zero n-gram precision makes the score 0; with
// eps, zero-match orders get precision 0.1 / total instead.
BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references,
                       BleuSmoothing smoothing = BleuSmoothing::none);

// One-line rendering: score, precisions, BP, lengths, and the signature.
std::string format_report(const BleuReport& report);

}  // namespace mt
