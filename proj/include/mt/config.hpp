#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mt/model.hpp"
#include "mt/trainer.hpp"

namespace mt {

// Experiment file sections. Parsing is strict: unknown keys anywhere in the
// file are rejected, and the effective (defaults-filled) form can be dumped
// back out so runs log exactly what they used.

struct DataSection {
  std::string src_lang;
  std::string tgt_lang;
  std::string train_src, train_tgt;
  std::string valid_src, valid_tgt;
  std::string test_src, test_tgt;
  std::string mono;
  uint64_t min_src_tokens = 1;
};

struct TokenizerSection {
  std::string vocab_path;  // empty: <out_dir>/vocab.txt
  uint64_t vocab_size = 1000;
  uint64_t max_piece_len = 8;
};

struct BacktranslationSection {
  int iterations = 1;
  DecodeConfig synth_decode{.beam_size = 1, .lenpen = 1.0, .max_len = 64};
};

struct TransferSection {
  std::string parent_src_lang;
  std::string parent_train_src, parent_train_tgt;
  std::string parent_valid_src, parent_valid_tgt;
  std::string parent_vocab_path;  // empty: trained from the parent corpus
  std::vector<std::string> freeze;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out_dir = "out";
  DataSection data;
  TokenizerSection tokenizer;
  ModelConfig model;  // vocab_size/seed/dropout_rate filled at runtime
  TrainConfig train;
  DecodeConfig decode;
  BacktranslationSection backtranslation;
  TransferSection transfer;
  bool criterion_given = false;  // criterion key present in the file
};

// Strict parse: every section optional, every unknown key or mistyped value
// is a config_error naming the offending location.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// The config with every default made explicit. parse(effective(c)) == c.
nlohmann::json effective_config(const ExperimentConfig& cfg);

// Maps the file sections onto the trainer's config. The master seed is
// fanned out by the caller; dropout already lives in the train section.
TrainConfig to_train_config(const ExperimentConfig& cfg);

// Criterion for the forward model of a back-translation run: focal loss
// unless the file names a criterion explicitly.
CriterionSpec bt_forward_criterion(const ExperimentConfig& cfg);

}  // namespace mt
