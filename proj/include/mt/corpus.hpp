#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mt {

enum class Provenance { real, synthetic };

struct SentencePair {
  std::string source;
  std::string target;
  Provenance provenance = Provenance::real;

  bool operator==(const SentencePair& o) const {
    return source == o.source && target == o.target &&
           provenance == o.provenance;
  }
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::string src_lang;
  std::string tgt_lang;
};

struct MonolingualCorpus {
  std::vector<std::string> lines;
  std::string lang;
};

struct FilterResult {
  ParallelCorpus corpus;
  size_t retained = 0;
  size_t dropped = 0;
};

// One split of a dataset: two aligned files plus their shared line count.
struct ManifestEntry {
  std::string split;
  std::string src_path;
  std::string tgt_path;
  size_t line_count = 0;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
};

// Loads two aligned one-sentence-per-line files. Lines are stripped of a
// trailing carriage return; no other normalization. Throws data_error on
// line-count mismatch (naming both counts), invalid UTF-8 (naming the byte
// offset within the file), or a line that is empty after trimming.
ParallelCorpus load_parallel(const std::string& src_path,
                             const std::string& tgt_path,
                             const std::string& src_lang,
                             const std::string& tgt_lang);

// Loads one-sentence-per-line text. Lines empty after trimming are dropped;
// the drop count is reported through dropped_empty when non-null.
MonolingualCorpus load_monolingual(const std::string& path,
                                   const std::string& lang,
                                   size_t* dropped_empty = nullptr);

// Writes the two sides to src_path / tgt_path, LF-terminated.
void save_parallel(const ParallelCorpus& corpus, const std::string& src_path,
                   const std::string& tgt_path);

void save_monolingual(const MonolingualCorpus& corpus,
                      const std::string& path);

// Splits on any run of ASCII whitespace.
size_t count_whitespace_tokens(const std::string& line);

// Keeps pairs whose source has at least min_src_tokens whitespace tokens.
// Order preserved. min_src_tokens must be >= 1.
FilterResult filter_min_tokens(const ParallelCorpus& corpus,
                               size_t min_src_tokens);

// a's pairs first. Language pairs must match.
ParallelCorpus concat(const ParallelCorpus& a, const ParallelCorpus& b);

// Swaps source/target of every pair and the language fields.
ParallelCorpus reverse(const ParallelCorpus& corpus);

// Deterministic Fisher-Yates permutation.
ParallelCorpus shuffle(const ParallelCorpus& corpus, uint64_t seed);

size_t count_file_lines(const std::string& path);

void save_manifest(const CorpusManifest& manifest, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

// Recounts every file named by the manifest and throws data_error on the
// first entry whose recorded line_count disagrees.
void verify_manifest(const CorpusManifest& manifest);

}  // namespace mt
