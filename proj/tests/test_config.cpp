#include "mt/config.hpp"

#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "mt/error.hpp"
#include "support/temp_dir.hpp"

using namespace mt;
using nlohmann::json;
using doctest::Contains;

TEST_CASE("empty config file yields the documented defaults") {
  ExperimentConfig cfg = parse_experiment_config(json::object());
  CHECK(cfg.seed == 1);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.data.src_lang.empty());
  CHECK(cfg.data.min_src_tokens == 1);
  CHECK(cfg.tokenizer.vocab_path.empty());
  CHECK(cfg.tokenizer.vocab_size == 1000);
  CHECK(cfg.tokenizer.max_piece_len == 8);
  CHECK(cfg.model.num_layers == 2);
  CHECK(cfg.model.hidden_size == 64);
  CHECK(cfg.model.num_heads == 4);
  CHECK(cfg.model.ffn_size == 256);
  CHECK(cfg.model.max_positions == 128);
  CHECK(cfg.train.learning_rate == 3e-4);
  CHECK(cfg.train.dropout == 0.3);
  CHECK(cfg.train.max_updates == 2000);
  CHECK(cfg.train.batch_size == 8);
  CHECK(cfg.train.criterion.key == "smoothed_ce");
  CHECK(cfg.train.criterion.label_smoothing == 0.2);
  CHECK(cfg.train.criterion.focal_alpha == 0.5);
  CHECK(cfg.train.criterion.focal_gamma == 1.0);
  CHECK(cfg.train.freeze_list.empty());
  CHECK(cfg.decode.beam_size == 5);
  CHECK(cfg.decode.lenpen == 1.0);
  CHECK(cfg.decode.max_len == 64);
  CHECK(cfg.backtranslation.iterations == 1);
  CHECK(cfg.backtranslation.synth_decode.beam_size == 1);
  CHECK(cfg.transfer.parent_src_lang.empty());
  CHECK(cfg.transfer.freeze.empty());
  CHECK_FALSE(cfg.criterion_given);
}

TEST_CASE("values flow from every section into the structs") {
  json j = {
      {"seed", 7},
      {"out_dir", "runs/exp1"},
      {"data",
       {{"src_lang", "de"},
        {"tgt_lang", "en"},
        {"train_src", "train.de"},
        {"train_tgt", "train.en"},
        {"valid_src", "valid.de"},
        {"valid_tgt", "valid.en"},
        {"test_src", "test.de"},
        {"test_tgt", "test.en"},
        {"mono", "mono.en"},
        {"min_src_tokens", 2}}},
      {"tokenizer",
       {{"vocab_path", "v.txt"}, {"vocab_size", 500}, {"max_piece_len", 6}}},
      {"model",
       {{"num_layers", 3},
        {"hidden_size", 96},
        {"num_heads", 6},
        {"ffn_size", 192},
        {"max_positions", 80}}},
      {"train",
       {{"learning_rate", 1e-3},
        {"dropout", 0.1},
        {"adam_beta1", 0.85},
        {"adam_beta2", 0.995},
        {"adam_eps", 1e-9},
        {"max_updates", 300},
        {"batch_size", 4},
        {"validate_every", 50},
        {"save_every", 100},
        {"freeze", {"tok_embed", "enc.0.attn"}},
        {"criterion",
         {{"key", "focal"},
          {"label_smoothing", 0.15},
          {"focal_alpha", 0.75},
          {"focal_gamma", 2.0}}}}},
      {"decode", {{"beam_size", 8}, {"lenpen", 0.7}, {"max_len", 40}}},
      {"backtranslation",
       {{"iterations", 3},
        {"synth_decode", {{"beam_size", 2}, {"max_len", 32}}}}},
      {"transfer",
       {{"parent_src_lang", "fr"},
        {"parent_train_src", "p.fr"},
        {"parent_train_tgt", "p.en"},
        {"parent_valid_src", "pv.fr"},
        {"parent_valid_tgt", "pv.en"},
        {"parent_vocab_path", "pv.txt"},
        {"freeze", {"dec.0.ffn"}}}}};

  ExperimentConfig cfg = parse_experiment_config(j);
  CHECK(cfg.seed == 7);
  CHECK(cfg.out_dir == "runs/exp1");
  CHECK(cfg.data.src_lang == "de");
  CHECK(cfg.data.tgt_lang == "en");
  CHECK(cfg.data.train_src == "train.de");
  CHECK(cfg.data.mono == "mono.en");
  CHECK(cfg.data.min_src_tokens == 2);
  CHECK(cfg.tokenizer.vocab_path == "v.txt");
  CHECK(cfg.tokenizer.vocab_size == 500);
  CHECK(cfg.tokenizer.max_piece_len == 6);
  CHECK(cfg.model.num_layers == 3);
  CHECK(cfg.model.hidden_size == 96);
  CHECK(cfg.model.num_heads == 6);
  CHECK(cfg.model.ffn_size == 192);
  CHECK(cfg.model.max_positions == 80);
  CHECK(cfg.train.learning_rate == 1e-3);
  CHECK(cfg.train.dropout == 0.1);
  CHECK(cfg.train.adam_beta1 == 0.85);
  CHECK(cfg.train.adam_beta2 == 0.995);
  CHECK(cfg.train.adam_eps == 1e-9);
  CHECK(cfg.train.max_updates == 300);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.validate_every == 50);
  CHECK(cfg.train.save_every == 100);
  CHECK(cfg.train.freeze_list ==
        std::vector<std::string>{"tok_embed", "enc.0.attn"});
  CHECK(cfg.train.criterion.key == "focal");
  CHECK(cfg.train.criterion.label_smoothing == 0.15);
  CHECK(cfg.train.criterion.focal_alpha == 0.75);
  CHECK(cfg.train.criterion.focal_gamma == 2.0);
  CHECK(cfg.criterion_given);
  CHECK(cfg.decode.beam_size == 8);
  CHECK(cfg.decode.lenpen == 0.7);
  CHECK(cfg.decode.max_len == 40);
  CHECK(cfg.backtranslation.iterations == 3);
  CHECK(cfg.backtranslation.synth_decode.beam_size == 2);
  CHECK(cfg.backtranslation.synth_decode.lenpen == 1.0);
  CHECK(cfg.backtranslation.synth_decode.max_len == 32);
  CHECK(cfg.transfer.parent_src_lang == "fr");
  CHECK(cfg.transfer.parent_train_src == "p.fr");
  CHECK(cfg.transfer.parent_valid_tgt == "pv.en");
  CHECK(cfg.transfer.parent_vocab_path == "pv.txt");
  CHECK(cfg.transfer.freeze == std::vector<std::string>{"dec.0.ffn"});
}

TEST_CASE("unknown keys are rejected with their location") {
  CHECK_THROWS_WITH_AS(parse_experiment_config(json{{"foo", 1}}),
                       Contains("unknown config key 'foo'"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"data", {{"source", "de"}}}}),
      Contains("unknown config key 'data.source'"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"model", {{"vocab_size", 100}}}}),
      Contains("unknown config key 'model.vocab_size'"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"model", {{"dropout_rate", 0.1}}}}),
      Contains("unknown config key 'model.dropout_rate'"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"train", {{"lr", 0.001}}}}),
      Contains("unknown config key 'train.lr'"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(
          json{{"train", {{"criterion", {{"gamma", 1.0}}}}}}),
      Contains("unknown config key 'train.criterion.gamma'"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(
          json{{"backtranslation",
                {{"synth_decode", {{"beam", 2}}}}}}),
      Contains("unknown config key 'backtranslation.synth_decode.beam'"),
      config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"transfer", {{"parent", "x"}}}}),
      Contains("unknown config key 'transfer.parent'"), config_error);
}

TEST_CASE("mistyped values are rejected with their location") {
  CHECK_THROWS_WITH_AS(parse_experiment_config(json{{"seed", "one"}}),
                       Contains("'seed' has the wrong type"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"model", {{"num_layers", "two"}}}}),
      Contains("'model.num_layers' has the wrong type"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"train", {{"freeze", "tok_embed"}}}}),
      Contains("'train.freeze' has the wrong type"), config_error);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(json{{"data", {{"src_lang", 3}}}}),
      Contains("'data.src_lang' has the wrong type"), config_error);
  CHECK_THROWS_WITH_AS(parse_experiment_config(json{{"train", 5}}),
                       Contains("section 'train' must be an object"),
                       config_error);
  CHECK_THROWS_WITH_AS(parse_experiment_config(json::array()),
                       Contains("'<root>' must be an object"), config_error);
}

TEST_CASE("effective config round-trips through the parser") {
  auto roundtrip = [](const ExperimentConfig& cfg) {
    json dumped = effective_config(cfg);
    ExperimentConfig again = parse_experiment_config(dumped);
    CHECK(effective_config(again) == dumped);
  };

  SUBCASE("defaults") { roundtrip(ExperimentConfig{}); }
  SUBCASE("customized") {
    ExperimentConfig cfg;
    cfg.seed = 99;
    cfg.out_dir = "elsewhere";
    cfg.data.src_lang = "xx";
    cfg.data.mono = "m.yy";
    cfg.tokenizer.vocab_size = 250;
    cfg.model.num_layers = 1;
    cfg.train.criterion.key = "focal";
    cfg.train.freeze_list = {"tok_embed"};
    cfg.decode.lenpen = 0.5;
    cfg.backtranslation.iterations = 2;
    cfg.transfer.freeze = {"enc.0.ffn"};
    roundtrip(cfg);
  }
  SUBCASE("effective form always names a criterion") {
    json dumped = effective_config(ExperimentConfig{});
    CHECK(dumped["train"]["criterion"]["key"] == "smoothed_ce");
    ExperimentConfig again = parse_experiment_config(dumped);
    CHECK(again.criterion_given);
  }
}

TEST_CASE("train section maps onto the trainer config with the master seed") {
  ExperimentConfig cfg;
  cfg.seed = 321;
  cfg.train.learning_rate = 2e-3;
  cfg.train.max_updates = 77;
  cfg.train.freeze_list = {"out_bias"};
  TrainConfig t = to_train_config(cfg);
  CHECK(t.seed == 321);
  CHECK(t.learning_rate == 2e-3);
  CHECK(t.max_updates == 77);
  CHECK(t.freeze_list == std::vector<std::string>{"out_bias"});
  CHECK(t.save_dir.empty());
}

TEST_CASE("back-translation forward criterion defaults to focal loss") {
  SUBCASE("no criterion in the file") {
    ExperimentConfig cfg = parse_experiment_config(json::object());
    CriterionSpec spec = bt_forward_criterion(cfg);
    CHECK(spec.key == "focal");
    CHECK(spec.focal_alpha == 0.5);
    CHECK(spec.focal_gamma == 1.0);
  }
  SUBCASE("explicit criterion wins") {
    json j = {{"train",
               {{"criterion",
                 {{"key", "smoothed_ce"}, {"label_smoothing", 0.1}}}}}};
    ExperimentConfig cfg = parse_experiment_config(j);
    CriterionSpec spec = bt_forward_criterion(cfg);
    CHECK(spec.key == "smoothed_ce");
    CHECK(spec.label_smoothing == 0.1);
  }
}

TEST_CASE("config files load from disk with parse errors reported") {
  testsupport::TempDir dir;
  SUBCASE("valid file") {
    testsupport::write_file(dir.file("c.json"),
                            "{\"seed\": 5, \"out_dir\": \"o\"}\n");
    ExperimentConfig cfg = load_experiment_config(dir.file("c.json"));
    CHECK(cfg.seed == 5);
    CHECK(cfg.out_dir == "o");
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("absent.json")),
                         Contains("cannot open config file"), config_error);
  }
  SUBCASE("malformed JSON") {
    testsupport::write_file(dir.file("bad.json"), "{\"seed\": }");
    CHECK_THROWS_WITH_AS(load_experiment_config(dir.file("bad.json")),
                         Contains("invalid JSON"), config_error);
  }
}
