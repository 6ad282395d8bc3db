#pragma once

// Deterministic word-substitution languages for end-to-end tests. Every
// concept id has one word form per language, so translation is a bijective
// word lookup with monotone alignment: small models can master it and the
// true inverse is known in closed form.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mt/corpus.hpp"
#include "mt/rng.hpp"
#include "mt/tokenizer.hpp"

namespace testsupport {

// Two syllables drawn from a 5x5 consonant/vowel grid: 625 distinct forms.
inline std::string word_form(size_t index, const char* consonants,
                             const char* vowels) {
  std::string w;
  const size_t digits[2] = {(index / 25) % 25, index % 25};
  for (size_t d : digits) {
    w += consonants[d / 5];
    w += vowels[d % 5];
  }
  return w;
}

inline std::string child_src_word(size_t i) { return word_form(i, "kptsm", "aeiou"); }
inline std::string parent_src_word(size_t i) { return word_form(i, "fwlrh", "aeiou"); }
inline std::string tgt_word(size_t i) { return word_form(i, "zbdgn", "aeiou"); }

// Index-aligned lexicons: src[i] translates to tgt[i].
struct ToyTask {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
};

inline ToyTask child_task(size_t n_words) {
  ToyTask t;
  for (size_t i = 0; i < n_words; ++i) {
    t.src.push_back(child_src_word(i));
    t.tgt.push_back(tgt_word(i));
  }
  return t;
}

// Shares the first `shared` source forms (and the whole target side) with
// the child task; the remaining source words are from a disjoint alphabet.
inline ToyTask parent_task(size_t n_words, size_t shared) {
  ToyTask t;
  for (size_t i = 0; i < n_words; ++i) {
    t.src.push_back(i < shared ? child_src_word(i) : parent_src_word(i));
    t.tgt.push_back(tgt_word(i));
  }
  return t;
}

inline std::vector<size_t> sample_indices(mt::Rng& rng, size_t n_words,
                                          size_t min_len, size_t max_len) {
  const size_t len =
      min_len + static_cast<size_t>(rng.next_below(max_len - min_len + 1));
  std::vector<size_t> idx(len);
  for (auto& i : idx) i = static_cast<size_t>(rng.next_below(n_words));
  return idx;
}

inline std::string render(const std::vector<size_t>& idx,
                          const std::vector<std::string>& lexicon) {
  std::string line;
  for (size_t k = 0; k < idx.size(); ++k) {
    if (k > 0) line += ' ';
    line += lexicon[idx[k]];
  }
  return line;
}

inline mt::ParallelCorpus sample_corpus(const ToyTask& task,
                                        const std::string& src_lang,
                                        const std::string& tgt_lang,
                                        size_t n_pairs, size_t min_len,
                                        size_t max_len, uint64_t seed) {
  mt::ParallelCorpus corpus;
  corpus.src_lang = src_lang;
  corpus.tgt_lang = tgt_lang;
  mt::Rng rng(mt::derive_seed(seed, "toy_corpus"));
  for (size_t i = 0; i < n_pairs; ++i) {
    const auto idx = sample_indices(rng, task.src.size(), min_len, max_len);
    corpus.pairs.push_back(
        {render(idx, task.src), render(idx, task.tgt), mt::Provenance::real});
  }
  return corpus;
}

// Target-side monolingual lines with their true source translations.
struct MonoWithTruth {
  mt::MonolingualCorpus mono;
  std::vector<std::string> true_sources;
};

inline MonoWithTruth sample_mono(const ToyTask& task,
                                 const std::string& tgt_lang, size_t n_lines,
                                 size_t min_len, size_t max_len,
                                 uint64_t seed) {
  MonoWithTruth out;
  out.mono.lang = tgt_lang;
  mt::Rng rng(mt::derive_seed(seed, "toy_mono"));
  for (size_t i = 0; i < n_lines; ++i) {
    const auto idx = sample_indices(rng, task.src.size(), min_len, max_len);
    out.mono.lines.push_back(render(idx, task.tgt));
    out.true_sources.push_back(render(idx, task.src));
  }
  return out;
}

// One line per (concept, language-side): the full substitution table, which
// guarantees every word form is seen by tokenizer and trainer.
inline mt::ParallelCorpus full_table(const ToyTask& task,
                                     const std::string& src_lang,
                                     const std::string& tgt_lang) {
  mt::ParallelCorpus corpus;
  corpus.src_lang = src_lang;
  corpus.tgt_lang = tgt_lang;
  for (size_t i = 0; i < task.src.size(); ++i) {
    corpus.pairs.push_back({task.src[i], task.tgt[i], mt::Provenance::real});
  }
  return corpus;
}

inline std::vector<std::string> corpus_lines(const mt::ParallelCorpus& corpus) {
  std::vector<std::string> lines;
  for (const auto& p : corpus.pairs) {
    lines.push_back(p.source);
    lines.push_back(p.target);
  }
  return lines;
}

inline mt::SubwordVocab toy_vocab(const std::vector<std::string>& lines,
                                  const std::vector<std::string>& langs,
                                  size_t vocab_size, uint64_t seed = 1) {
  mt::UnigramTrainOptions opts;
  opts.vocab_size = vocab_size;
  opts.langs = langs;
  opts.seed = seed;
  return mt::train_unigram(lines, opts);
}

}  // namespace testsupport
