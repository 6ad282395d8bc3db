#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mt/checkpoint.hpp"
#include "mt/corpus.hpp"
#include "mt/criterion.hpp"
#include "mt/model.hpp"
#include "mt/tokenizer.hpp"

namespace mt {

// Loss criterion selected by key; hyperparameters for both criteria travel
// together so a config file can switch criterion without restructuring.
struct CriterionSpec {
  std::string key = "smoothed_ce";  // "smoothed_ce" | "focal"
  double label_smoothing = 0.2;
  double focal_alpha = 0.5;
  double focal_gamma = 1.0;
};

void validate_criterion(const CriterionSpec& spec);

CriterionResult<float> apply_criterion(const CriterionSpec& spec,
                                       const Mat<float>& logits,
                                       const std::vector<int>& targets);

struct TrainConfig {
  double learning_rate = 3e-4;
  double dropout = 0.3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  uint64_t max_updates = 2000;
  uint64_t batch_size = 8;  // sentence pairs per update
  uint64_t validate_every = 200;
  CriterionSpec criterion;
  std::vector<std::string> freeze_list;
  uint64_t seed = 1;
  // When set, checkpoint_best.bin / checkpoint_last.bin / train.log are
  // written here, plus checkpoint_<update>.bin every save_every updates.
  std::string save_dir;
  uint64_t save_every = 0;
  // Learning-rate schedule hook (base_lr, update) -> lr; constant when unset.
  std::function<double(double, uint64_t)> lr_schedule;
};

void validate_config(const TrainConfig& cfg);

// One sentence pair prepared for the model: source ids end with
// [eos, src_tag]; the decoder input starts with the target tag and the
// targets are the same pieces shifted left, closing with eos.
struct EncodedPair {
  std::vector<int> src;
  std::vector<int> dec_in;
  std::vector<int> targets;
};

EncodedPair encode_pair(const SubwordVocab& vocab, const SentencePair& pair,
                        const std::string& src_lang,
                        const std::string& tgt_lang, int max_positions);

std::vector<EncodedPair> encode_corpus(const SubwordVocab& vocab,
                                       const ParallelCorpus& corpus,
                                       int max_positions);

// Mean loss per target token over a full encoded corpus, eval mode.
double evaluate_loss(const Seq2SeqModel<float>& model,
                     const std::vector<EncodedPair>& pairs,
                     const CriterionSpec& criterion);

struct TrainRecord {
  uint64_t update = 0;
  double train_loss = 0.0;
  // NaN on updates where no validation ran.
  double valid_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  Checkpoint last;
  Checkpoint best;
  std::vector<TrainRecord> history;
};

// Runs exactly max_updates ADAM updates over seed-shuffled batches,
// validating every validate_every updates and at the final update. The best
// checkpoint minimizes validation loss, earlier update winning ties.
// Passing `resume` continues that run bit-exactly.
TrainResult train(Seq2SeqModel<float>& model, const ParallelCorpus& train_data,
                  const ParallelCorpus& valid_data, const SubwordVocab& vocab,
                  const TrainConfig& cfg, const Checkpoint* resume = nullptr);

const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints);

}  // namespace mt
