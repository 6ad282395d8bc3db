#pragma once

#include <string>
#include <vector>

#include "mt/checkpoint.hpp"
#include "mt/corpus.hpp"
#include "mt/model.hpp"
#include "mt/tokenizer.hpp"
#include "mt/trainer.hpp"
#include "mt/translate.hpp"

namespace mt {

inline TrainConfig focal_train_config() {
  TrainConfig cfg;
  cfg.criterion.key = "focal";
  return cfg;
}

struct BacktranslationOutput {
  ParallelCorpus corpus;  // (synthesized source, original target) pairs
  size_t dropped = 0;     // monolingual lines whose decode came back empty
};

// Translates every monolingual target-language line back into the source
// language with the reverse model. Output order follows input order; pairs
// are marked synthetic.
BacktranslationOutput backtranslate(const Seq2SeqModel<float>& reverse_model,
                                    const SubwordVocab& vocab,
                                    const MonolingualCorpus& mono,
                                    const std::string& source_lang,
                                    const DecodeConfig& decode_cfg);

struct BtExperimentConfig {
  ParallelCorpus train;  // real parallel data
  ParallelCorpus valid;
  ParallelCorpus test;
  MonolingualCorpus mono;  // target-language lines
  ModelConfig model;
  TrainConfig reverse_train;
  TrainConfig forward_train = focal_train_config();
  DecodeConfig synth_decode{.beam_size = 1, .lenpen = 1.0, .max_len = 64};
  DecodeConfig eval_decode;
  int iterations = 1;
  std::string work_dir;  // empty: keep intermediates in memory only
};

struct BtExperimentResult {
  Checkpoint forward_best;
  BleuReport test_bleu;
  CorpusManifest manifest;
  std::vector<std::string> checkpoint_paths;  // filled when work_dir is set
  size_t synthesized = 0;
  size_t dropped = 0;
};

// Back-translation recipe: train a reverse model on the flipped parallel
// data, synthesize source sides for the monolingual lines, then train the
// forward model on real + synthetic. Additional iterations append another
// round of synthetic data using models trained on the grown corpus.
BtExperimentResult run_bt_experiment(const BtExperimentConfig& cfg,
                                     const SubwordVocab& vocab);

// Child model initialized from a parent checkpoint. Non-embedding tensors
// are copied bit-exactly. Embedding rows (and output-bias columns) follow
// the child vocabulary: tokens whose surface exists in the parent vocab take
// the parent row; child-only tokens take the parent row of the same id when
// in range, else the parent unk row.
Seq2SeqModel<float> transfer_init(const Checkpoint& parent,
                                  const SubwordVocab& parent_vocab,
                                  const SubwordVocab& child_vocab);

// Same, validating an explicitly requested child architecture against the
// parent checkpoint (must match except vocab_size).
Seq2SeqModel<float> transfer_init(const Checkpoint& parent,
                                  const SubwordVocab& parent_vocab,
                                  const SubwordVocab& child_vocab,
                                  const ModelConfig& child_config);

struct TransferExperimentConfig {
  ParallelCorpus parent_train;
  ParallelCorpus parent_valid;
  ParallelCorpus child_train;
  ParallelCorpus child_valid;
  ParallelCorpus child_test;
  ModelConfig model;
  TrainConfig parent_cfg;
  TrainConfig child_cfg = focal_train_config();  // freeze_list applies here
  DecodeConfig decode;
  std::string work_dir;
};

struct TransferExperimentResult {
  Checkpoint parent_best;
  Checkpoint child_best;
  BleuReport test_bleu;
  CorpusManifest manifest;
  std::vector<std::string> checkpoint_paths;  // filled when work_dir is set
};

TransferExperimentResult run_transfer_experiment(
    const TransferExperimentConfig& cfg, const SubwordVocab& parent_vocab,
    const SubwordVocab& child_vocab);

}  // namespace mt
