#include "mt/pipelines.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mt/error.hpp"
#include "mt/rng.hpp"

namespace mt {

namespace {

namespace fs = std::filesystem;

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

// Re-throws stage failures with the stage name prepended, preserving the
// error category so CLI exit codes stay meaningful.
template <typename F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const config_error& e) {
    throw config_error("[" + name + "] " + e.what());
  } catch (const data_error& e) {
    throw data_error("[" + name + "] " + e.what());
  }
}

void check_language_pair(const ParallelCorpus& corpus, const std::string& name,
                         const std::string& src_lang,
                         const std::string& tgt_lang) {
  if (corpus.src_lang != src_lang || corpus.tgt_lang != tgt_lang) {
    throw config_error(name + " language pair " + corpus.src_lang + "-" +
                       corpus.tgt_lang + " does not match " + src_lang + "-" +
                       tgt_lang);
  }
}

// Resolves the experiment's model config against the vocabulary that the
// model will be trained with.
ModelConfig resolve_model_config(ModelConfig mc, const SubwordVocab& vocab) {
  if (mc.vocab_size == 0) {
    mc.vocab_size = static_cast<int>(vocab.size());
  } else if (mc.vocab_size != static_cast<int>(vocab.size())) {
    throw config_error("model vocab_size " + std::to_string(mc.vocab_size) +
                       " does not match the vocabulary size " +
                       std::to_string(vocab.size()));
  }
  validate_config(mc);
  return mc;
}

ManifestEntry corpus_entry(const std::string& split,
                           const ParallelCorpus& corpus,
                           const std::string& src_path = "",
                           const std::string& tgt_path = "") {
  return ManifestEntry{split, src_path, tgt_path, corpus.pairs.size()};
}

// Persists the corpus under dir as <stem>.<src_lang> / <stem>.<tgt_lang>
// and returns a manifest entry carrying the paths. With an empty dir the
// entry records the size only.
ManifestEntry persist_corpus(const std::string& split,
                             const ParallelCorpus& corpus, const fs::path& dir,
                             const std::string& stem) {
  if (dir.empty()) return corpus_entry(split, corpus);
  const fs::path src = dir / (stem + "." + corpus.src_lang);
  const fs::path tgt = dir / (stem + "." + corpus.tgt_lang);
  save_parallel(corpus, src.string(), tgt.string());
  return corpus_entry(split, corpus, src.string(), tgt.string());
}

void record_checkpoints(std::vector<std::string>& paths,
                        const std::string& save_dir) {
  if (save_dir.empty()) return;
  paths.push_back((fs::path(save_dir) / "checkpoint_best.bin").string());
  paths.push_back((fs::path(save_dir) / "checkpoint_last.bin").string());
}

Seq2SeqModel<float> model_of(const Checkpoint& ckpt) {
  return Seq2SeqModel<float>{ckpt.config, ckpt.params};
}

}  // namespace

BacktranslationOutput backtranslate(const Seq2SeqModel<float>& reverse_model,
                                    const SubwordVocab& vocab,
                                    const MonolingualCorpus& mono,
                                    const std::string& source_lang,
                                    const DecodeConfig& decode_cfg) {
  validate_config(decode_cfg);
  if (mono.lang == source_lang) {
    throw config_error("monolingual language equals the requested source "
                       "language '" +
                       source_lang + "'");
  }
  BacktranslationOutput out;
  out.corpus.src_lang = source_lang;
  out.corpus.tgt_lang = mono.lang;
  for (const auto& line : mono.lines) {
    std::string synthesized = translate_line(reverse_model, vocab, line,
                                             mono.lang, source_lang,
                                             decode_cfg);
    if (blank(synthesized)) {
      ++out.dropped;
      continue;
    }
    out.corpus.pairs.push_back(
        {std::move(synthesized), line, Provenance::synthetic});
  }
  return out;
}

BtExperimentResult run_bt_experiment(const BtExperimentConfig& cfg,
                                     const SubwordVocab& vocab) {
  if (cfg.iterations < 1) throw config_error("iterations must be >= 1");
  validate_config(cfg.reverse_train);
  validate_config(cfg.forward_train);
  validate_config(cfg.synth_decode);
  validate_config(cfg.eval_decode);
  if (cfg.mono.lang != cfg.train.tgt_lang) {
    throw config_error("monolingual language '" + cfg.mono.lang +
                       "' does not match the parallel target language '" +
                       cfg.train.tgt_lang + "'");
  }
  check_language_pair(cfg.valid, "validation", cfg.train.src_lang,
                      cfg.train.tgt_lang);
  check_language_pair(cfg.test, "test", cfg.train.src_lang,
                      cfg.train.tgt_lang);
  const ModelConfig mc = resolve_model_config(cfg.model, vocab);

  const fs::path work(cfg.work_dir);
  if (!cfg.work_dir.empty()) fs::create_directories(work);

  BtExperimentResult result;
  result.manifest.entries.push_back(corpus_entry("train", cfg.train));
  result.manifest.entries.push_back(corpus_entry("valid", cfg.valid));
  result.manifest.entries.push_back(corpus_entry("test", cfg.test));
  result.manifest.entries.push_back(
      ManifestEntry{"mono", "", "", cfg.mono.lines.size()});

  // Real pairs first; each round appends its synthetic pairs.
  ParallelCorpus combined = cfg.train;
  TrainResult forward_run;

  for (int it = 1; it <= cfg.iterations; ++it) {
    const std::string round = "iteration " + std::to_string(it);
    const std::string tag = std::to_string(it);

    TrainConfig rcfg = cfg.reverse_train;
    rcfg.seed = derive_seed(cfg.reverse_train.seed, "bt_reverse", it);
    if (!cfg.work_dir.empty()) rcfg.save_dir = (work / ("reverse_" + tag)).string();
    ModelConfig rmc = mc;
    rmc.seed = derive_seed(mc.seed, "bt_reverse_init", it);
    Seq2SeqModel<float> reverse_model = init_model<float>(rmc);
    TrainResult reverse_run = run_stage("reverse training, " + round, [&] {
      return train(reverse_model, reverse(combined), reverse(cfg.valid),
                   vocab, rcfg);
    });
    record_checkpoints(result.checkpoint_paths, rcfg.save_dir);

    const Seq2SeqModel<float> reverse_best = model_of(reverse_run.best);
    BacktranslationOutput synth = run_stage("back-translation, " + round, [&] {
      return backtranslate(reverse_best, vocab, cfg.mono, cfg.train.src_lang,
                           cfg.synth_decode);
    });
    result.synthesized += synth.corpus.pairs.size();
    result.dropped += synth.dropped;
    result.manifest.entries.push_back(persist_corpus(
        "synthetic." + tag, synth.corpus, work, "synthetic_" + tag));
    combined = concat(combined, synth.corpus);
    result.manifest.entries.push_back(
        persist_corpus("combined." + tag, combined, work, "combined_" + tag));

    TrainConfig fcfg = cfg.forward_train;
    fcfg.seed = derive_seed(cfg.forward_train.seed, "bt_forward", it);
    if (!cfg.work_dir.empty()) fcfg.save_dir = (work / ("forward_" + tag)).string();
    ModelConfig fmc = mc;
    fmc.seed = derive_seed(mc.seed, "bt_forward_init", it);
    Seq2SeqModel<float> forward_model = init_model<float>(fmc);
    forward_run = run_stage("forward training, " + round, [&] {
      return train(forward_model, combined, cfg.valid, vocab, fcfg);
    });
    record_checkpoints(result.checkpoint_paths, fcfg.save_dir);
  }

  result.forward_best = forward_run.best;
  const Seq2SeqModel<float> best = model_of(result.forward_best);
  result.test_bleu = run_stage("test scoring", [&] {
    return score_checkpoint(best, vocab, cfg.test, cfg.eval_decode);
  });

  if (!cfg.work_dir.empty()) {
    save_manifest(result.manifest, (work / "manifest.json").string());
  }
  return result;
}

Seq2SeqModel<float> transfer_init(const Checkpoint& parent,
                                  const SubwordVocab& parent_vocab,
                                  const SubwordVocab& child_vocab) {
  ModelConfig child_config = parent.config;
  child_config.vocab_size = static_cast<int>(child_vocab.size());
  return transfer_init(parent, parent_vocab, child_vocab, child_config);
}

Seq2SeqModel<float> transfer_init(const Checkpoint& parent,
                                  const SubwordVocab& parent_vocab,
                                  const SubwordVocab& child_vocab,
                                  const ModelConfig& child_config) {
  if (parent.config.vocab_size != static_cast<int>(parent_vocab.size())) {
    throw config_error("parent checkpoint vocab_size " +
                       std::to_string(parent.config.vocab_size) +
                       " does not match the parent vocabulary size " +
                       std::to_string(parent_vocab.size()));
  }
  if (child_config.vocab_size != static_cast<int>(child_vocab.size())) {
    throw config_error("child vocab_size " +
                       std::to_string(child_config.vocab_size) +
                       " does not match the child vocabulary size " +
                       std::to_string(child_vocab.size()));
  }
  std::string diffs;
  auto differs = [&diffs](const std::string& field, auto a, auto b) {
    if (a == b) return;
    if (!diffs.empty()) diffs += ", ";
    diffs += field;
  };
  differs("num_layers", parent.config.num_layers, child_config.num_layers);
  differs("hidden_size", parent.config.hidden_size, child_config.hidden_size);
  differs("num_heads", parent.config.num_heads, child_config.num_heads);
  differs("ffn_size", parent.config.ffn_size, child_config.ffn_size);
  differs("max_positions", parent.config.max_positions,
          child_config.max_positions);
  if (!diffs.empty()) {
    throw config_error(
        "child architecture differs from the parent checkpoint in: " + diffs);
  }

  Seq2SeqModel<float> child;
  child.config = child_config;
  child.params = allocate_params<float>(child_config);

  std::unordered_map<std::string, const Mat<float>*> parent_by_name;
  visit_params(parent.params,
               [&](const std::string& name, const Mat<float>& m) {
                 parent_by_name.emplace(name, &m);
               });
  visit_params(child.params, [&](const std::string& name, Mat<float>& m) {
    if (name == "tok_embed" || name == "out_bias") return;
    m = *parent_by_name.at(name);
  });

  // Shared surfaces keep their parent embedding; child-only tokens fall
  // back to the same-id parent row, or the unk row when out of range.
  std::unordered_map<std::string, int> parent_ids;
  for (int id = 0; id < static_cast<int>(parent_vocab.size()); ++id) {
    parent_ids.emplace(parent_vocab.surface(id), id);
  }
  const auto& ptok = parent.params.tok_embed;
  const auto& pbias = parent.params.out_bias;
  for (int cid = 0; cid < static_cast<int>(child_vocab.size()); ++cid) {
    int pid;
    auto hit = parent_ids.find(child_vocab.surface(cid));
    if (hit != parent_ids.end()) {
      pid = hit->second;
    } else if (cid < static_cast<int>(parent_vocab.size())) {
      pid = cid;
    } else {
      pid = SubwordVocab::kUnkId;
    }
    child.params.tok_embed.row(cid) = ptok.row(pid);
    child.params.out_bias(0, cid) = pbias(0, pid);
  }
  return child;
}

TransferExperimentResult run_transfer_experiment(
    const TransferExperimentConfig& cfg, const SubwordVocab& parent_vocab,
    const SubwordVocab& child_vocab) {
  validate_config(cfg.parent_cfg);
  validate_config(cfg.child_cfg);
  validate_config(cfg.decode);
  if (cfg.parent_train.tgt_lang != cfg.child_train.tgt_lang) {
    throw config_error("parent and child experiments must share the target "
                       "language (got '" +
                       cfg.parent_train.tgt_lang + "' and '" +
                       cfg.child_train.tgt_lang + "')");
  }
  check_language_pair(cfg.parent_valid, "parent validation",
                      cfg.parent_train.src_lang, cfg.parent_train.tgt_lang);
  check_language_pair(cfg.child_valid, "child validation",
                      cfg.child_train.src_lang, cfg.child_train.tgt_lang);
  check_language_pair(cfg.child_test, "child test", cfg.child_train.src_lang,
                      cfg.child_train.tgt_lang);
  const ModelConfig pmc = resolve_model_config(cfg.model, parent_vocab);

  const fs::path work(cfg.work_dir);
  if (!cfg.work_dir.empty()) fs::create_directories(work);

  TransferExperimentResult result;
  result.manifest.entries.push_back(
      corpus_entry("parent_train", cfg.parent_train));
  result.manifest.entries.push_back(
      corpus_entry("parent_valid", cfg.parent_valid));
  result.manifest.entries.push_back(
      corpus_entry("child_train", cfg.child_train));
  result.manifest.entries.push_back(
      corpus_entry("child_valid", cfg.child_valid));
  result.manifest.entries.push_back(corpus_entry("child_test", cfg.child_test));

  TrainConfig pcfg = cfg.parent_cfg;
  if (!cfg.work_dir.empty()) pcfg.save_dir = (work / "parent").string();
  ModelConfig parent_mc = pmc;
  parent_mc.seed = derive_seed(pmc.seed, "transfer_parent_init");
  Seq2SeqModel<float> parent_model = init_model<float>(parent_mc);
  TrainResult parent_run = run_stage("parent training", [&] {
    return train(parent_model, cfg.parent_train, cfg.parent_valid,
                 parent_vocab, pcfg);
  });
  result.parent_best = parent_run.best;
  record_checkpoints(result.checkpoint_paths, pcfg.save_dir);

  Seq2SeqModel<float> child_model = run_stage("transfer initialization", [&] {
    return transfer_init(result.parent_best, parent_vocab, child_vocab);
  });
  TrainConfig ccfg = cfg.child_cfg;
  if (!cfg.work_dir.empty()) ccfg.save_dir = (work / "child").string();
  TrainResult child_run = run_stage("child fine-tuning", [&] {
    return train(child_model, cfg.child_train, cfg.child_valid, child_vocab,
                 ccfg);
  });
  result.child_best = child_run.best;
  record_checkpoints(result.checkpoint_paths, ccfg.save_dir);

  const Seq2SeqModel<float> best = model_of(result.child_best);
  result.test_bleu = run_stage("test scoring", [&] {
    return score_checkpoint(best, child_vocab, cfg.child_test, cfg.decode);
  });

  if (!cfg.work_dir.empty()) {
    save_manifest(result.manifest, (work / "manifest.json").string());
  }
  return result;
}

}  // namespace mt
