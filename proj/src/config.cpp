#include "mt/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "mt/error.hpp"

namespace mt {

namespace {

using nlohmann::json;

// Context string like "train.criterion" for error messages.
std::string join_path(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

void require_object(const json& j, const std::string& scope) {
  if (!j.is_object()) {
    throw config_error("config section '" + scope + "' must be an object");
  }
}

void reject_unknown(const json& j, const std::string& scope,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw config_error("unknown config key '" + join_path(scope, key) +
                         "'");
    }
  }
}

template <typename T>
void read_field(const json& j, const std::string& scope, const char* key,
                T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw config_error("config key '" + join_path(scope, key) +
                       "' has the wrong type");
  }
}

DecodeConfig parse_decode(const json& j, const std::string& scope,
                          DecodeConfig out) {
  require_object(j, scope);
  reject_unknown(j, scope, {"beam_size", "lenpen", "max_len"});
  read_field(j, scope, "beam_size", out.beam_size);
  read_field(j, scope, "lenpen", out.lenpen);
  read_field(j, scope, "max_len", out.max_len);
  return out;
}

CriterionSpec parse_criterion(const json& j, const std::string& scope) {
  require_object(j, scope);
  reject_unknown(j, scope,
                 {"key", "label_smoothing", "focal_alpha", "focal_gamma"});
  CriterionSpec spec;
  read_field(j, scope, "key", spec.key);
  read_field(j, scope, "label_smoothing", spec.label_smoothing);
  read_field(j, scope, "focal_alpha", spec.focal_alpha);
  read_field(j, scope, "focal_gamma", spec.focal_gamma);
  return spec;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  require_object(j, "<root>");
  reject_unknown(j, "",
                 {"seed", "out_dir", "data", "tokenizer", "model", "train",
                  "decode", "backtranslation", "transfer"});
  ExperimentConfig cfg;
  read_field(j, "", "seed", cfg.seed);
  read_field(j, "", "out_dir", cfg.out_dir);

  if (auto it = j.find("data"); it != j.end()) {
    const auto& d = *it;
    require_object(d, "data");
    reject_unknown(d, "data",
                   {"src_lang", "tgt_lang", "train_src", "train_tgt",
                    "valid_src", "valid_tgt", "test_src", "test_tgt", "mono",
                    "min_src_tokens"});
    read_field(d, "data", "src_lang", cfg.data.src_lang);
    read_field(d, "data", "tgt_lang", cfg.data.tgt_lang);
    read_field(d, "data", "train_src", cfg.data.train_src);
    read_field(d, "data", "train_tgt", cfg.data.train_tgt);
    read_field(d, "data", "valid_src", cfg.data.valid_src);
    read_field(d, "data", "valid_tgt", cfg.data.valid_tgt);
    read_field(d, "data", "test_src", cfg.data.test_src);
    read_field(d, "data", "test_tgt", cfg.data.test_tgt);
    read_field(d, "data", "mono", cfg.data.mono);
    read_field(d, "data", "min_src_tokens", cfg.data.min_src_tokens);
  }

  if (auto it = j.find("tokenizer"); it != j.end()) {
    const auto& t = *it;
    require_object(t, "tokenizer");
    reject_unknown(t, "tokenizer",
                   {"vocab_path", "vocab_size", "max_piece_len"});
    read_field(t, "tokenizer", "vocab_path", cfg.tokenizer.vocab_path);
    read_field(t, "tokenizer", "vocab_size", cfg.tokenizer.vocab_size);
    read_field(t, "tokenizer", "max_piece_len", cfg.tokenizer.max_piece_len);
  }

  if (auto it = j.find("model"); it != j.end()) {
    const auto& m = *it;
    require_object(m, "model");
    reject_unknown(m, "model",
                   {"num_layers", "hidden_size", "num_heads", "ffn_size",
                    "max_positions"});
    read_field(m, "model", "num_layers", cfg.model.num_layers);
    read_field(m, "model", "hidden_size", cfg.model.hidden_size);
    read_field(m, "model", "num_heads", cfg.model.num_heads);
    read_field(m, "model", "ffn_size", cfg.model.ffn_size);
    read_field(m, "model", "max_positions", cfg.model.max_positions);
  }

  if (auto it = j.find("train"); it != j.end()) {
    const auto& t = *it;
    require_object(t, "train");
    reject_unknown(t, "train",
                   {"learning_rate", "dropout", "adam_beta1", "adam_beta2",
                    "adam_eps", "max_updates", "batch_size", "validate_every",
                    "save_every", "criterion", "freeze"});
    read_field(t, "train", "learning_rate", cfg.train.learning_rate);
    read_field(t, "train", "dropout", cfg.train.dropout);
    read_field(t, "train", "adam_beta1", cfg.train.adam_beta1);
    read_field(t, "train", "adam_beta2", cfg.train.adam_beta2);
    read_field(t, "train", "adam_eps", cfg.train.adam_eps);
    read_field(t, "train", "max_updates", cfg.train.max_updates);
    read_field(t, "train", "batch_size", cfg.train.batch_size);
    read_field(t, "train", "validate_every", cfg.train.validate_every);
    read_field(t, "train", "save_every", cfg.train.save_every);
    read_field(t, "train", "freeze", cfg.train.freeze_list);
    if (auto c = t.find("criterion"); c != t.end()) {
      cfg.train.criterion = parse_criterion(*c, "train.criterion");
      cfg.criterion_given = true;
    }
  }

  if (auto it = j.find("decode"); it != j.end()) {
    cfg.decode = parse_decode(*it, "decode", cfg.decode);
  }

  if (auto it = j.find("backtranslation"); it != j.end()) {
    const auto& b = *it;
    require_object(b, "backtranslation");
    reject_unknown(b, "backtranslation", {"iterations", "synth_decode"});
    read_field(b, "backtranslation", "iterations",
               cfg.backtranslation.iterations);
    if (auto s = b.find("synth_decode"); s != b.end()) {
      cfg.backtranslation.synth_decode =
          parse_decode(*s, "backtranslation.synth_decode",
                       cfg.backtranslation.synth_decode);
    }
  }

  if (auto it = j.find("transfer"); it != j.end()) {
    const auto& t = *it;
    require_object(t, "transfer");
    reject_unknown(t, "transfer",
                   {"parent_src_lang", "parent_train_src", "parent_train_tgt",
                    "parent_valid_src", "parent_valid_tgt",
                    "parent_vocab_path", "freeze"});
    read_field(t, "transfer", "parent_src_lang",
               cfg.transfer.parent_src_lang);
    read_field(t, "transfer", "parent_train_src",
               cfg.transfer.parent_train_src);
    read_field(t, "transfer", "parent_train_tgt",
               cfg.transfer.parent_train_tgt);
    read_field(t, "transfer", "parent_valid_src",
               cfg.transfer.parent_valid_src);
    read_field(t, "transfer", "parent_valid_tgt",
               cfg.transfer.parent_valid_tgt);
    read_field(t, "transfer", "parent_vocab_path",
               cfg.transfer.parent_vocab_path);
    read_field(t, "transfer", "freeze", cfg.transfer.freeze);
  }

  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("invalid JSON in " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

nlohmann::json effective_config(const ExperimentConfig& cfg) {
  json decode = {{"beam_size", cfg.decode.beam_size},
                 {"lenpen", cfg.decode.lenpen},
                 {"max_len", cfg.decode.max_len}};
  json synth = {{"beam_size", cfg.backtranslation.synth_decode.beam_size},
                {"lenpen", cfg.backtranslation.synth_decode.lenpen},
                {"max_len", cfg.backtranslation.synth_decode.max_len}};
  return json{
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"data",
       {{"src_lang", cfg.data.src_lang},
        {"tgt_lang", cfg.data.tgt_lang},
        {"train_src", cfg.data.train_src},
        {"train_tgt", cfg.data.train_tgt},
        {"valid_src", cfg.data.valid_src},
        {"valid_tgt", cfg.data.valid_tgt},
        {"test_src", cfg.data.test_src},
        {"test_tgt", cfg.data.test_tgt},
        {"mono", cfg.data.mono},
        {"min_src_tokens", cfg.data.min_src_tokens}}},
      {"tokenizer",
       {{"vocab_path", cfg.tokenizer.vocab_path},
        {"vocab_size", cfg.tokenizer.vocab_size},
        {"max_piece_len", cfg.tokenizer.max_piece_len}}},
      {"model",
       {{"num_layers", cfg.model.num_layers},
        {"hidden_size", cfg.model.hidden_size},
        {"num_heads", cfg.model.num_heads},
        {"ffn_size", cfg.model.ffn_size},
        {"max_positions", cfg.model.max_positions}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"dropout", cfg.train.dropout},
        {"adam_beta1", cfg.train.adam_beta1},
        {"adam_beta2", cfg.train.adam_beta2},
        {"adam_eps", cfg.train.adam_eps},
        {"max_updates", cfg.train.max_updates},
        {"batch_size", cfg.train.batch_size},
        {"validate_every", cfg.train.validate_every},
        {"save_every", cfg.train.save_every},
        {"freeze", cfg.train.freeze_list},
        {"criterion",
         {{"key", cfg.train.criterion.key},
          {"label_smoothing", cfg.train.criterion.label_smoothing},
          {"focal_alpha", cfg.train.criterion.focal_alpha},
          {"focal_gamma", cfg.train.criterion.focal_gamma}}}}},
      {"decode", decode},
      {"backtranslation",
       {{"iterations", cfg.backtranslation.iterations},
        {"synth_decode", synth}}},
      {"transfer",
       {{"parent_src_lang", cfg.transfer.parent_src_lang},
        {"parent_train_src", cfg.transfer.parent_train_src},
        {"parent_train_tgt", cfg.transfer.parent_train_tgt},
        {"parent_valid_src", cfg.transfer.parent_valid_src},
        {"parent_valid_tgt", cfg.transfer.parent_valid_tgt},
        {"parent_vocab_path", cfg.transfer.parent_vocab_path},
        {"freeze", cfg.transfer.freeze}}}};
}

TrainConfig to_train_config(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

CriterionSpec bt_forward_criterion(const ExperimentConfig& cfg) {
  if (cfg.criterion_given) return cfg.train.criterion;
  CriterionSpec spec = cfg.train.criterion;
  spec.key = "focal";
  return spec;
}

}  // namespace mt
