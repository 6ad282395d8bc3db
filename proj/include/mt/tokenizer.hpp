#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mt {

using TokenSequence = std::vector<int>;

struct VocabPiece {
  std::string surface;
  double log_prob = 0.0;
};

// Subword inventory with fixed id layout: specials (pad, unk, bos, eos),
// then language tags, then pieces. finalize() must be called after the
// public fields are populated; train_unigram and load_vocab do this.
class SubwordVocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kBosId = 2;
  static constexpr int kEosId = 3;
  static constexpr int kNumSpecials = 4;

  std::vector<std::string> lang_tags;  // full surfaces, e.g. "<en>"
  std::vector<VocabPiece> pieces;

  // Builds the lookup index and validates invariants (unique surfaces,
  // finite log_probs <= 0, tags disjoint from pieces).
  void finalize();

  size_t size() const { return kNumSpecials + lang_tags.size() + pieces.size(); }
  int piece_offset() const {
    return kNumSpecials + static_cast<int>(lang_tags.size());
  }

  // Accepts a language code ("en") or a full tag surface ("<en>").
  int tag_id(const std::string& lang) const;

  const std::string& surface(int id) const;
  int find_piece(std::string_view surface) const;  // -1 when absent
  double min_piece_log_prob() const { return min_piece_log_prob_; }
  size_t max_piece_codepoints() const { return max_piece_codepoints_; }

 private:
  struct SvHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  struct SvEq {
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const {
      return a == b;
    }
  };
  std::unordered_map<std::string, int, SvHash, SvEq> index_;
  double min_piece_log_prob_ = 0.0;
  size_t max_piece_codepoints_ = 0;
};

struct UnigramTrainOptions {
  size_t vocab_size = 1000;  // total ids including specials and tags
  std::vector<std::string> langs;  // language codes, tagged as "<code>"
  size_t max_piece_len = 8;        // codepoints per candidate
  size_t max_candidates_factor = 20;
  size_t em_iterations_per_round = 2;
  double prune_keep_fraction = 0.75;
  uint64_t seed = 1;
};

// Snapshot passed to the EM observer once per iteration, before the
// parameter update, so callers can recompute the likelihood independently.
struct EmSnapshot {
  size_t round = 0;
  size_t iteration = 0;  // global, across rounds
  double log_likelihood = 0.0;
  std::vector<VocabPiece> pieces;
};

using EmObserver = std::function<void(const EmSnapshot&)>;

// Trains a unigram-LM subword vocabulary: seeds candidates from frequent
// substrings, runs EM on the segmentation lattice, prunes low-contribution
// pieces per round until the piece budget is met. Deterministic.
SubwordVocab train_unigram(const std::vector<std::string>& lines,
                           const UnigramTrainOptions& opts,
                           const EmObserver& observer = {});

// Viterbi segmentation of the whitespace-sentinel form of `sentence`,
// followed by [eos, lang tag]. Unknown codepoints map to unk.
TokenSequence encode(const SubwordVocab& vocab, const std::string& sentence,
                     const std::string& lang);

// Piece surfaces of the Viterbi segmentation only (no eos or tag);
// unknown codepoints appear as their raw text.
std::vector<std::string> encode_pieces(const SubwordVocab& vocab,
                                       const std::string& sentence);

// Strips specials and tags, concatenates surfaces, restores spaces.
std::string decode(const SubwordVocab& vocab, const TokenSequence& ids);

void save_vocab(const SubwordVocab& vocab, const std::string& path);
SubwordVocab load_vocab(const std::string& path);

}  // namespace mt
