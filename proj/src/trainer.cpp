#include "mt/trainer.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mt/adam.hpp"
#include "mt/rng.hpp"

namespace mt {

void validate_criterion(const CriterionSpec& spec) {
  if (spec.key != "smoothed_ce" && spec.key != "focal") {
    throw config_error("unknown criterion \"" + spec.key +
                       "\" (expected smoothed_ce or focal)");
  }
  if (spec.key == "smoothed_ce") {
    if (!(spec.label_smoothing >= 0.0 && spec.label_smoothing < 1.0)) {
      throw config_error("label_smoothing must lie in [0, 1)");
    }
  } else {
    if (!(spec.focal_alpha > 0.0 && spec.focal_alpha <= 1.0)) {
      throw config_error("focal_alpha must lie in (0, 1]");
    }
    if (!(spec.focal_gamma >= 0.0)) {
      throw config_error("focal_gamma must be >= 0");
    }
  }
}

CriterionResult<float> apply_criterion(const CriterionSpec& spec,
                                       const Mat<float>& logits,
                                       const std::vector<int>& targets) {
  if (spec.key == "focal") {
    return focal_loss(logits, targets,
                      {.alpha = spec.focal_alpha,
                       .gamma = spec.focal_gamma,
                       .ignore_id = kPadTokenId});
  }
  return label_smoothed_ce(
      logits, targets,
      {.epsilon = spec.label_smoothing, .ignore_id = kPadTokenId});
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.max_updates < 1) throw config_error("max_updates must be >= 1");
  if (!(cfg.learning_rate > 0.0)) {
    throw config_error("learning_rate must be > 0");
  }
  if (cfg.batch_size < 1) throw config_error("batch_size must be >= 1");
  if (cfg.validate_every < 1) {
    throw config_error("validate_every must be >= 1");
  }
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
    throw config_error("dropout must lie in [0, 1)");
  }
  validate_criterion(cfg.criterion);
}

EncodedPair encode_pair(const SubwordVocab& vocab, const SentencePair& pair,
                        const std::string& src_lang,
                        const std::string& tgt_lang, int max_positions) {
  const auto cap = static_cast<size_t>(max_positions);
  EncodedPair out;

  out.src = encode(vocab, pair.source, src_lang);
  if (out.src.size() > cap) {
    // Keep the leading pieces; the eos + language tag suffix is preserved.
    const int tag = out.src.back();
    out.src.resize(cap - 2);
    out.src.push_back(SubwordVocab::kEosId);
    out.src.push_back(tag);
  }

  std::vector<int> pieces = encode(vocab, pair.target, tgt_lang);
  pieces.resize(pieces.size() - 2);  // drop the [eos, tag] suffix
  if (pieces.size() > cap - 1) pieces.resize(cap - 1);

  out.dec_in.reserve(pieces.size() + 1);
  out.dec_in.push_back(vocab.tag_id(tgt_lang));
  out.dec_in.insert(out.dec_in.end(), pieces.begin(), pieces.end());
  out.targets = std::move(pieces);
  out.targets.push_back(SubwordVocab::kEosId);
  return out;
}

std::vector<EncodedPair> encode_corpus(const SubwordVocab& vocab,
                                       const ParallelCorpus& corpus,
                                       int max_positions) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.pairs.size());
  for (const auto& pair : corpus.pairs) {
    out.push_back(encode_pair(vocab, pair, corpus.src_lang, corpus.tgt_lang,
                              max_positions));
  }
  return out;
}

namespace {

size_t scored_tokens(const std::vector<int>& targets) {
  size_t n = 0;
  for (int t : targets) {
    if (t != kPadTokenId) ++n;
  }
  return n;
}

void accumulate(Seq2SeqParams<float>& acc, const Seq2SeqParams<float>& delta) {
  auto a = collect_params(acc);
  auto d = collect_params(const_cast<Seq2SeqParams<float>&>(delta));
  for (size_t i = 0; i < a.size(); ++i) {
    *a[i].second += *d[i].second;
  }
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, uint64_t epoch) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "batch_order", epoch));
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Checkpoint snapshot(const Seq2SeqModel<float>& model, uint64_t updates,
                    double valid_loss, const AdamState<float>& opt) {
  Checkpoint ckpt;
  ckpt.config = model.config;
  ckpt.params = model.params;
  ckpt.updates = updates;
  ckpt.valid_loss = valid_loss;
  ckpt.has_optimizer = true;
  ckpt.opt = opt;
  return ckpt;
}

}  // namespace

double evaluate_loss(const Seq2SeqModel<float>& model,
                     const std::vector<EncodedPair>& pairs,
                     const CriterionSpec& criterion) {
  if (pairs.empty()) {
    throw config_error("cannot evaluate loss on an empty corpus");
  }
  double loss_sum = 0.0;
  size_t tokens = 0;
  for (const auto& pair : pairs) {
    auto fwd = forward(model, pair.src, pair.dec_in);
    auto res = apply_criterion(criterion, fwd.logits, pair.targets);
    loss_sum += res.loss_sum;
    tokens += res.tokens;
  }
  return loss_sum / static_cast<double>(tokens);
}

TrainResult train(Seq2SeqModel<float>& model, const ParallelCorpus& train_data,
                  const ParallelCorpus& valid_data, const SubwordVocab& vocab,
                  const TrainConfig& cfg, const Checkpoint* resume) {
  validate_config(cfg);
  if (train_data.pairs.empty()) {
    throw config_error("training corpus is empty");
  }
  if (valid_data.pairs.empty()) {
    throw config_error("validation corpus is empty");
  }
  model.config.dropout_rate = cfg.dropout;

  const auto train_pairs =
      encode_corpus(vocab, train_data, model.config.max_positions);
  const auto valid_pairs =
      encode_corpus(vocab, valid_data, model.config.max_positions);

  AdamState<float> opt = init_adam_state(model.params);
  uint64_t start_update = 0;
  if (resume != nullptr) {
    if (!(resume->config == model.config)) {
      throw config_error("resume checkpoint model config does not match");
    }
    if (!resume->has_optimizer) {
      throw config_error("resume checkpoint has no optimizer state");
    }
    if (resume->updates >= cfg.max_updates) {
      throw config_error("resume checkpoint is already at update " +
                         std::to_string(resume->updates) + " of " +
                         std::to_string(cfg.max_updates));
    }
    model.params = resume->params;
    opt = resume->opt;
    start_update = resume->updates;
  }

  const AdamConfig adam_base{.learning_rate = cfg.learning_rate,
                             .beta1 = cfg.adam_beta1,
                             .beta2 = cfg.adam_beta2,
                             .eps = cfg.adam_eps};
  validate_config(adam_base);

  const std::filesystem::path save_dir = cfg.save_dir;
  if (!cfg.save_dir.empty()) {
    std::filesystem::create_directories(save_dir);
  }

  const size_t n = train_pairs.size();
  const uint64_t batches_per_epoch =
      (n + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult result;
  bool have_best = false;
  // When resuming into a directory with an earlier best checkpoint, keep
  // competing against it so best selection spans the whole run.
  if (resume != nullptr && !cfg.save_dir.empty()) {
    const auto best_path = save_dir / "checkpoint_best.bin";
    if (std::filesystem::exists(best_path)) {
      result.best = load_checkpoint(best_path);
      have_best = true;
    }
  }

  std::vector<size_t> order;
  uint64_t order_epoch = 0;
  bool order_ready = false;

  for (uint64_t update = start_update + 1; update <= cfg.max_updates;
       ++update) {
    const uint64_t epoch = (update - 1) / batches_per_epoch;
    const uint64_t slot = (update - 1) % batches_per_epoch;
    if (!order_ready || epoch != order_epoch) {
      order = epoch_order(n, cfg.seed, epoch);
      order_epoch = epoch;
      order_ready = true;
    }
    const size_t begin = static_cast<size_t>(slot) * cfg.batch_size;
    const size_t end = std::min(n, begin + cfg.batch_size);

    size_t total_tokens = 0;
    for (size_t k = begin; k < end; ++k) {
      total_tokens += scored_tokens(train_pairs[order[k]].targets);
    }

    double loss_sum = 0.0;
    Seq2SeqParams<float> grads = zeros_like(model.params);
    for (size_t k = begin; k < end; ++k) {
      const EncodedPair& pair = train_pairs[order[k]];
      const uint64_t drop_seed =
          derive_seed(cfg.seed, "dropout", update, k - begin);
      auto fwd = forward(model, pair.src, pair.dec_in, true, drop_seed);
      auto crit = apply_criterion(cfg.criterion, fwd.logits, pair.targets);
      loss_sum += crit.loss_sum;
      const float scale = static_cast<float>(
          static_cast<double>(crit.tokens) / static_cast<double>(total_tokens));
      Mat<float> dlogits = crit.grad_logits * scale;
      accumulate(grads,
                 backward(model, fwd.tape, dlogits, cfg.freeze_list));
    }
    const double train_loss = loss_sum / static_cast<double>(total_tokens);
    if (!std::isfinite(train_loss)) {
      throw data_error("non-finite training loss at update " +
                       std::to_string(update));
    }

    AdamConfig adam_cfg = adam_base;
    if (cfg.lr_schedule) {
      adam_cfg.learning_rate = cfg.lr_schedule(cfg.learning_rate, update);
    }
    adam_step(model.params, grads, opt, adam_cfg, cfg.freeze_list);

    TrainRecord record;
    record.update = update;
    record.train_loss = train_loss;

    if (update % cfg.validate_every == 0 || update == cfg.max_updates) {
      record.valid_loss = evaluate_loss(model, valid_pairs, cfg.criterion);
      if (!std::isfinite(record.valid_loss)) {
        throw data_error("non-finite validation loss at update " +
                         std::to_string(update));
      }
      if (!have_best || record.valid_loss < result.best.valid_loss) {
        result.best = snapshot(model, update, record.valid_loss, opt);
        have_best = true;
        if (!cfg.save_dir.empty()) {
          save_checkpoint(result.best, save_dir / "checkpoint_best.bin");
        }
      }
    }
    result.history.push_back(record);

    if (cfg.save_every > 0 && update % cfg.save_every == 0 &&
        !cfg.save_dir.empty()) {
      save_checkpoint(
          snapshot(model, update, record.valid_loss, opt),
          save_dir / ("checkpoint_" + std::to_string(update) + ".bin"));
    }
  }

  result.last = snapshot(model, cfg.max_updates,
                         result.history.back().valid_loss, opt);
  if (!cfg.save_dir.empty()) {
    save_checkpoint(result.last, save_dir / "checkpoint_last.bin");
    std::ofstream log(save_dir / "train.log", std::ios::trunc);
    if (!log) {
      throw data_error("cannot write training log in " + cfg.save_dir);
    }
    for (const auto& r : result.history) {
      log << r.update << '\t' << format_double(r.train_loss) << '\t'
          << format_double(r.valid_loss) << '\n';
    }
  }
  return result;
}

const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints) {
  if (checkpoints.empty()) {
    throw config_error("cannot select the best of zero checkpoints");
  }
  size_t best = 0;
  bool have = false;
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    const double loss = checkpoints[i].valid_loss;
    if (!std::isfinite(loss)) continue;
    if (!have || loss < checkpoints[best].valid_loss) {
      best = i;
      have = true;
    }
  }
  return checkpoints[best];
}

}  // namespace mt
