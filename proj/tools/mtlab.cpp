#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mt/config.hpp"
#include "mt/corpus.hpp"
#include "mt/error.hpp"
#include "mt/pipelines.hpp"
#include "mt/rng.hpp"
#include "mt/tokenizer.hpp"
#include "mt/trainer.hpp"
#include "mt/translate.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Command-line overrides collected before the config file is interpreted.
struct Overrides {
  uint64_t seed = 0;
  bool seed_set = false;
  uint64_t max_updates = 0;
  bool max_updates_set = false;
  double lenpen = 0.0;
  bool lenpen_set = false;
  std::string criterion;
  int iterations = 0;
  bool iterations_set = false;
};

mt::ExperimentConfig load_config(const std::string& path,
                                 const Overrides& ov) {
  if (path.empty()) throw mt::config_error("--config is required");
  mt::ExperimentConfig cfg = mt::load_experiment_config(path);
  if (ov.seed_set) cfg.seed = ov.seed;
  if (ov.max_updates_set) cfg.train.max_updates = ov.max_updates;
  if (ov.lenpen_set) cfg.decode.lenpen = ov.lenpen;
  if (!ov.criterion.empty()) {
    cfg.train.criterion.key = ov.criterion;
    cfg.criterion_given = true;
  }
  if (ov.iterations_set) cfg.backtranslation.iterations = ov.iterations;
  return cfg;
}

std::string vocab_path_of(const mt::ExperimentConfig& cfg) {
  if (!cfg.tokenizer.vocab_path.empty()) return cfg.tokenizer.vocab_path;
  return (fs::path(cfg.out_dir) / "vocab.txt").string();
}

void require_pair_config(const mt::ExperimentConfig& cfg) {
  if (cfg.data.src_lang.empty() || cfg.data.tgt_lang.empty()) {
    throw mt::config_error("data.src_lang and data.tgt_lang must be set");
  }
  if (cfg.data.src_lang == cfg.data.tgt_lang) {
    throw mt::config_error("data.src_lang and data.tgt_lang must differ");
  }
}

void require_paths(const std::string& src, const std::string& tgt,
                   const std::string& what) {
  if (src.empty() || tgt.empty()) {
    throw mt::config_error("data." + what + "_src and data." + what +
                           "_tgt must be set");
  }
}

mt::ModelConfig model_config_of(const mt::ExperimentConfig& cfg,
                                const mt::SubwordVocab& vocab) {
  mt::ModelConfig mc = cfg.model;
  mc.vocab_size = static_cast<int>(vocab.size());
  mc.dropout_rate = cfg.train.dropout;
  mc.seed = cfg.seed;
  mt::validate_config(mc);
  return mc;
}

// Every command with an output directory records the config it actually ran
// with, defaults included.
void dump_effective_config(const mt::ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "config.json", std::ios::binary);
  out << mt::effective_config(cfg).dump(2) << '\n';
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mt::data_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_preprocess(const std::string& config_path, const Overrides& ov) {
  mt::ExperimentConfig cfg = load_config(config_path, ov);
  require_pair_config(cfg);
  require_paths(cfg.data.train_src, cfg.data.train_tgt, "train");
  if (cfg.tokenizer.vocab_size < 5) {
    throw mt::config_error("tokenizer.vocab_size is too small");
  }

  auto train = mt::load_parallel(cfg.data.train_src, cfg.data.train_tgt,
                                 cfg.data.src_lang, cfg.data.tgt_lang);
  auto filtered = mt::filter_min_tokens(train, cfg.data.min_src_tokens);
  std::cout << "train: kept " << filtered.retained << " pairs, dropped "
            << filtered.dropped << " under " << cfg.data.min_src_tokens
            << " source tokens\n";

  std::vector<std::string> vocab_lines;
  for (const auto& pair : filtered.corpus.pairs) {
    vocab_lines.push_back(pair.source);
    vocab_lines.push_back(pair.target);
  }
  mt::UnigramTrainOptions opts;
  opts.vocab_size = cfg.tokenizer.vocab_size;
  opts.max_piece_len = cfg.tokenizer.max_piece_len;
  opts.langs = {cfg.data.src_lang, cfg.data.tgt_lang};
  opts.seed = mt::derive_seed(cfg.seed, "tokenizer");
  mt::SubwordVocab vocab = mt::train_unigram(vocab_lines, opts);

  fs::create_directories(cfg.out_dir);
  dump_effective_config(cfg);
  const fs::path out(cfg.out_dir);
  const std::string vocab_path = vocab_path_of(cfg);
  mt::save_vocab(vocab, vocab_path);
  std::cout << "vocab: " << vocab.size() << " pieces -> " << vocab_path
            << '\n';

  mt::CorpusManifest manifest;
  auto persist = [&](const mt::ParallelCorpus& corpus,
                     const std::string& split) {
    const auto src = (out / (split + "." + corpus.src_lang)).string();
    const auto tgt = (out / (split + "." + corpus.tgt_lang)).string();
    mt::save_parallel(corpus, src, tgt);
    manifest.entries.push_back({split, src, tgt, corpus.pairs.size()});
    std::cout << split << ": " << corpus.pairs.size() << " pairs -> " << src
              << ", " << tgt << '\n';
  };
  persist(filtered.corpus, "train");
  if (!cfg.data.valid_src.empty() || !cfg.data.valid_tgt.empty()) {
    require_paths(cfg.data.valid_src, cfg.data.valid_tgt, "valid");
    persist(mt::load_parallel(cfg.data.valid_src, cfg.data.valid_tgt,
                              cfg.data.src_lang, cfg.data.tgt_lang),
            "valid");
  }
  if (!cfg.data.test_src.empty() || !cfg.data.test_tgt.empty()) {
    require_paths(cfg.data.test_src, cfg.data.test_tgt, "test");
    persist(mt::load_parallel(cfg.data.test_src, cfg.data.test_tgt,
                              cfg.data.src_lang, cfg.data.tgt_lang),
            "test");
  }
  if (!cfg.data.mono.empty()) {
    size_t dropped = 0;
    auto mono =
        mt::load_monolingual(cfg.data.mono, cfg.data.tgt_lang, &dropped);
    const auto path = (out / ("mono." + mono.lang)).string();
    mt::save_monolingual(mono, path);
    manifest.entries.push_back({"mono", path, "", mono.lines.size()});
    std::cout << "mono: " << mono.lines.size() << " lines (dropped "
              << dropped << " blank) -> " << path << '\n';
  }
  mt::save_manifest(manifest, (out / "manifest.json").string());
  std::cout << "manifest -> " << (out / "manifest.json").string() << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const Overrides& ov,
              bool resume) {
  mt::ExperimentConfig cfg = load_config(config_path, ov);
  require_pair_config(cfg);
  require_paths(cfg.data.train_src, cfg.data.train_tgt, "train");
  require_paths(cfg.data.valid_src, cfg.data.valid_tgt, "valid");
  mt::TrainConfig tc = mt::to_train_config(cfg);
  tc.save_dir = cfg.out_dir;
  mt::validate_config(tc);

  mt::SubwordVocab vocab = mt::load_vocab(vocab_path_of(cfg));
  auto train_data = mt::load_parallel(cfg.data.train_src, cfg.data.train_tgt,
                                      cfg.data.src_lang, cfg.data.tgt_lang);
  auto valid_data = mt::load_parallel(cfg.data.valid_src, cfg.data.valid_tgt,
                                      cfg.data.src_lang, cfg.data.tgt_lang);

  mt::Seq2SeqModel<float> model;
  model.config = model_config_of(cfg, vocab);
  mt::Checkpoint resumed;
  const mt::Checkpoint* resume_from = nullptr;
  if (resume) {
    resumed =
        mt::load_checkpoint(fs::path(cfg.out_dir) / "checkpoint_last.bin");
    resume_from = &resumed;
    model.params = mt::allocate_params<float>(model.config);
  } else {
    model = mt::init_model<float>(model.config);
  }

  dump_effective_config(cfg);
  mt::TrainResult result = mt::train(model, train_data, valid_data, vocab,
                                     tc, resume_from);
  std::cout << "trained to update " << result.last.updates << " ("
            << tc.criterion.key << ")\n";
  std::cout << "best: update " << result.best.updates << ", valid loss "
            << fmt(result.best.valid_loss) << '\n';
  std::cout << "checkpoints and train.log in " << cfg.out_dir << '\n';
  return 0;
}

int cmd_generate(const std::string& config_path, const Overrides& ov,
                 std::string checkpoint_path, std::string output_path) {
  mt::ExperimentConfig cfg = load_config(config_path, ov);
  require_pair_config(cfg);
  require_paths(cfg.data.test_src, cfg.data.test_tgt, "test");
  mt::validate_config(cfg.decode);
  if (checkpoint_path.empty()) {
    checkpoint_path =
        (fs::path(cfg.out_dir) / "checkpoint_best.bin").string();
  }
  if (output_path.empty()) {
    output_path = (fs::path(cfg.out_dir) / "hypotheses.txt").string();
  }

  mt::SubwordVocab vocab = mt::load_vocab(vocab_path_of(cfg));
  mt::Checkpoint ckpt = mt::load_checkpoint(checkpoint_path);
  if (ckpt.config.vocab_size != static_cast<int>(vocab.size())) {
    throw mt::config_error("checkpoint vocab_size does not match the vocab");
  }
  mt::Seq2SeqModel<float> model{ckpt.config, std::move(ckpt.params)};
  auto test = mt::load_parallel(cfg.data.test_src, cfg.data.test_tgt,
                                cfg.data.src_lang, cfg.data.tgt_lang);
  if (test.pairs.empty()) throw mt::config_error("test corpus is empty");

  std::vector<std::string> sources, refs;
  for (const auto& pair : test.pairs) {
    sources.push_back(pair.source);
    refs.push_back(pair.target);
  }
  auto hyps = mt::translate_lines(model, vocab, sources, cfg.data.src_lang,
                                  cfg.data.tgt_lang, cfg.decode);

  fs::create_directories(fs::path(output_path).parent_path().empty()
                             ? "."
                             : fs::path(output_path).parent_path().string());
  std::ofstream out(output_path, std::ios::binary);
  if (!out) throw mt::data_error("cannot write file: " + output_path);
  for (const auto& h : hyps) out << h << '\n';
  out.close();

  std::cout << hyps.size() << " hypotheses -> " << output_path << '\n';
  std::cout << mt::format_report(mt::corpus_bleu(hyps, refs)) << '\n';
  return 0;
}

int cmd_interactive(const std::string& config_path, const Overrides& ov,
                    std::string checkpoint_path) {
  mt::ExperimentConfig cfg = load_config(config_path, ov);
  require_pair_config(cfg);
  mt::validate_config(cfg.decode);
  if (checkpoint_path.empty()) {
    checkpoint_path =
        (fs::path(cfg.out_dir) / "checkpoint_best.bin").string();
  }
  mt::SubwordVocab vocab = mt::load_vocab(vocab_path_of(cfg));
  mt::Checkpoint ckpt = mt::load_checkpoint(checkpoint_path);
  if (ckpt.config.vocab_size != static_cast<int>(vocab.size())) {
    throw mt::config_error("checkpoint vocab_size does not match the vocab");
  }
  mt::Seq2SeqModel<float> model{ckpt.config, std::move(ckpt.params)};

  // One output line per input line: hypothesis, raw score, normalized score.
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      std::cout << "\t0\t0\n" << std::flush;
      continue;
    }
    auto t = mt::translate_line_scored(model, vocab, line, cfg.data.src_lang,
                                       cfg.data.tgt_lang, cfg.decode);
    std::cout << t.text << '\t' << fmt(t.raw_score) << '\t'
              << fmt(t.normalized_score) << '\n'
              << std::flush;
  }
  return 0;
}

int cmd_backtranslate(const std::string& config_path, const Overrides& ov) {
  mt::ExperimentConfig cfg = load_config(config_path, ov);
  require_pair_config(cfg);
  require_paths(cfg.data.train_src, cfg.data.train_tgt, "train");
  require_paths(cfg.data.valid_src, cfg.data.valid_tgt, "valid");
  require_paths(cfg.data.test_src, cfg.data.test_tgt, "test");
  if (cfg.data.mono.empty()) {
    throw mt::config_error("data.mono must be set for back-translation");
  }

  mt::SubwordVocab vocab = mt::load_vocab(vocab_path_of(cfg));
  mt::BtExperimentConfig bt;
  bt.train = mt::load_parallel(cfg.data.train_src, cfg.data.train_tgt,
                               cfg.data.src_lang, cfg.data.tgt_lang);
  bt.valid = mt::load_parallel(cfg.data.valid_src, cfg.data.valid_tgt,
                               cfg.data.src_lang, cfg.data.tgt_lang);
  bt.test = mt::load_parallel(cfg.data.test_src, cfg.data.test_tgt,
                              cfg.data.src_lang, cfg.data.tgt_lang);
  bt.mono = mt::load_monolingual(cfg.data.mono, cfg.data.tgt_lang);
  bt.model = model_config_of(cfg, vocab);
  bt.reverse_train = mt::to_train_config(cfg);
  bt.forward_train = mt::to_train_config(cfg);
  bt.forward_train.criterion = mt::bt_forward_criterion(cfg);
  bt.synth_decode = cfg.backtranslation.synth_decode;
  bt.eval_decode = cfg.decode;
  bt.iterations = cfg.backtranslation.iterations;
  bt.work_dir = cfg.out_dir;
  mt::validate_config(bt.reverse_train);
  mt::validate_config(bt.forward_train);
  mt::validate_config(bt.synth_decode);
  mt::validate_config(bt.eval_decode);
  if (bt.iterations < 1) {
    throw mt::config_error("backtranslation.iterations must be >= 1");
  }
  dump_effective_config(cfg);

  mt::BtExperimentResult result = mt::run_bt_experiment(bt, vocab);
  std::cout << "synthesized " << result.synthesized << " pairs, dropped "
            << result.dropped << " empty decodes\n";
  for (const auto& path : result.checkpoint_paths) {
    std::cout << "checkpoint: " << path << '\n';
  }
  std::cout << mt::format_report(result.test_bleu) << '\n';
  return 0;
}

int cmd_transfer(const std::string& config_path, const Overrides& ov) {
  mt::ExperimentConfig cfg = load_config(config_path, ov);
  require_pair_config(cfg);
  require_paths(cfg.data.train_src, cfg.data.train_tgt, "train");
  require_paths(cfg.data.valid_src, cfg.data.valid_tgt, "valid");
  require_paths(cfg.data.test_src, cfg.data.test_tgt, "test");
  const auto& tr = cfg.transfer;
  if (tr.parent_src_lang.empty()) {
    throw mt::config_error("transfer.parent_src_lang must be set");
  }
  if (tr.parent_train_src.empty() || tr.parent_train_tgt.empty() ||
      tr.parent_valid_src.empty() || tr.parent_valid_tgt.empty()) {
    throw mt::config_error("transfer parent corpus paths must be set");
  }

  mt::SubwordVocab child_vocab = mt::load_vocab(vocab_path_of(cfg));
  mt::TransferExperimentConfig tx;
  tx.parent_train =
      mt::load_parallel(tr.parent_train_src, tr.parent_train_tgt,
                        tr.parent_src_lang, cfg.data.tgt_lang);
  tx.parent_valid =
      mt::load_parallel(tr.parent_valid_src, tr.parent_valid_tgt,
                        tr.parent_src_lang, cfg.data.tgt_lang);
  tx.child_train = mt::load_parallel(cfg.data.train_src, cfg.data.train_tgt,
                                     cfg.data.src_lang, cfg.data.tgt_lang);
  tx.child_valid = mt::load_parallel(cfg.data.valid_src, cfg.data.valid_tgt,
                                     cfg.data.src_lang, cfg.data.tgt_lang);
  tx.child_test = mt::load_parallel(cfg.data.test_src, cfg.data.test_tgt,
                                    cfg.data.src_lang, cfg.data.tgt_lang);

  mt::SubwordVocab parent_vocab;
  if (!tr.parent_vocab_path.empty()) {
    parent_vocab = mt::load_vocab(tr.parent_vocab_path);
  } else {
    std::vector<std::string> lines;
    for (const auto& pair : tx.parent_train.pairs) {
      lines.push_back(pair.source);
      lines.push_back(pair.target);
    }
    mt::UnigramTrainOptions opts;
    opts.vocab_size = cfg.tokenizer.vocab_size;
    opts.max_piece_len = cfg.tokenizer.max_piece_len;
    opts.langs = {tr.parent_src_lang, cfg.data.tgt_lang};
    opts.seed = mt::derive_seed(cfg.seed, "parent_tokenizer");
    parent_vocab = mt::train_unigram(lines, opts);
  }

  tx.model = cfg.model;
  tx.model.dropout_rate = cfg.train.dropout;
  tx.model.seed = cfg.seed;
  tx.parent_cfg = mt::to_train_config(cfg);
  tx.child_cfg = mt::to_train_config(cfg);
  tx.child_cfg.criterion = mt::bt_forward_criterion(cfg);
  tx.child_cfg.freeze_list = tr.freeze;
  tx.decode = cfg.decode;
  tx.work_dir = cfg.out_dir;
  mt::validate_config(tx.parent_cfg);
  mt::validate_config(tx.child_cfg);
  mt::validate_config(tx.decode);
  dump_effective_config(cfg);
  if (tr.parent_vocab_path.empty()) {
    mt::save_vocab(parent_vocab,
                   (fs::path(cfg.out_dir) / "parent_vocab.txt").string());
  }

  mt::TransferExperimentResult result =
      mt::run_transfer_experiment(tx, parent_vocab, child_vocab);
  std::cout << "parent best: update " << result.parent_best.updates
            << ", valid loss " << fmt(result.parent_best.valid_loss) << '\n';
  std::cout << "child best: update " << result.child_best.updates
            << ", valid loss " << fmt(result.child_best.valid_loss) << '\n';
  for (const auto& path : result.checkpoint_paths) {
    std::cout << "checkpoint: " << path << '\n';
  }
  std::cout << mt::format_report(result.test_bleu) << '\n';
  return 0;
}

int cmd_score(const std::string& hyp_path, const std::string& ref_path) {
  auto hyps = read_lines(hyp_path);
  auto refs = read_lines(ref_path);
  std::cout << mt::format_report(mt::corpus_bleu(hyps, refs)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mtlab: desk-scale NMT laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string output_path;
  std::string hyp_path, ref_path;
  bool resume = false;
  Overrides ov;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file");
  };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", ov.seed, "master random seed")
        ->each([&](const std::string&) { ov.seed_set = true; });
  };

  auto* preprocess = app.add_subcommand(
      "preprocess", "filter corpora and train the subword vocab");
  add_config(preprocess);
  add_seed(preprocess);

  auto* train =
      app.add_subcommand("train", "train a model from the config");
  add_config(train);
  add_seed(train);
  train->add_option("--max-updates", ov.max_updates, "ADAM update budget")
      ->each([&](const std::string&) { ov.max_updates_set = true; });
  train->add_option("--criterion", ov.criterion,
                    "loss criterion (smoothed_ce | focal)");
  train->add_flag("--resume", resume, "continue from checkpoint_last.bin");

  auto* generate = app.add_subcommand(
      "generate", "translate the test set and report BLEU");
  add_config(generate);
  generate->add_option("--checkpoint", checkpoint_path,
                       "model checkpoint (default: out_dir best)");
  generate->add_option("--output", output_path, "hypotheses file");
  generate->add_option("--lenpen", ov.lenpen, "length penalty")
      ->each([&](const std::string&) { ov.lenpen_set = true; });

  auto* interactive = app.add_subcommand(
      "interactive", "translate stdin lines one at a time");
  add_config(interactive);
  interactive->add_option("--checkpoint", checkpoint_path,
                          "model checkpoint (default: out_dir best)");
  interactive->add_option("--lenpen", ov.lenpen, "length penalty")
      ->each([&](const std::string&) { ov.lenpen_set = true; });

  auto* backtranslate = app.add_subcommand(
      "backtranslate", "back-translation experiment end to end");
  add_config(backtranslate);
  add_seed(backtranslate);
  backtranslate->add_option("--max-updates", ov.max_updates,
                            "ADAM update budget per training stage")
      ->each([&](const std::string&) { ov.max_updates_set = true; });
  backtranslate->add_option("--criterion", ov.criterion,
                            "loss criterion for both models");
  backtranslate
      ->add_option("--iterations", ov.iterations, "back-translation rounds")
      ->each([&](const std::string&) { ov.iterations_set = true; });

  auto* transfer = app.add_subcommand(
      "transfer", "parent-to-child transfer experiment end to end");
  add_config(transfer);
  add_seed(transfer);
  transfer->add_option("--max-updates", ov.max_updates,
                       "ADAM update budget per training stage")
      ->each([&](const std::string&) { ov.max_updates_set = true; });
  transfer->add_option("--criterion", ov.criterion,
                       "loss criterion for the child model");

  auto* score =
      app.add_subcommand("score", "BLEU for a hypothesis/reference pair");
  score->add_option("hyp", hyp_path, "hypotheses, one per line")->required();
  score->add_option("ref", ref_path, "references, one per line")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0; usage errors are 1
  }

  try {
    if (preprocess->parsed()) return cmd_preprocess(config_path, ov);
    if (train->parsed()) return cmd_train(config_path, ov, resume);
    if (generate->parsed()) {
      return cmd_generate(config_path, ov, checkpoint_path, output_path);
    }
    if (interactive->parsed()) {
      return cmd_interactive(config_path, ov, checkpoint_path);
    }
    if (backtranslate->parsed()) return cmd_backtranslate(config_path, ov);
    if (transfer->parsed()) return cmd_transfer(config_path, ov);
    if (score->parsed()) return cmd_score(hyp_path, ref_path);
  } catch (const mt::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
