// Acceptance gate for the laboratory. Each numbered check prints one
// [PASS]/[FAIL] line with the measured values; the exit status is the
// number of failures. Oracles come from tests/support and are written
// against the definitions, not against the implementation.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "mt/corpus.hpp"
#include "mt/criterion.hpp"
#include "mt/model.hpp"
#include "mt/pipelines.hpp"
#include "mt/rng.hpp"
#include "mt/tokenizer.hpp"
#include "mt/trainer.hpp"
#include "mt/translate.hpp"
#include "mt/utf8.hpp"
#include "support/bleu_oracle.hpp"
#include "support/segmentation_oracle.hpp"
#include "support/text_gen.hpp"
#include "support/toylang.hpp"

using mt::Mat;

namespace {

constexpr double kFocalIdentityTol = 1e-12;
constexpr double kFocalPointTol = 1e-12;
constexpr double kCriterionFdTol = 1e-6;
constexpr double kModelFdTol = 1e-4;
constexpr double kBleuOracleTol = 1e-9;
constexpr size_t kOverfitParamBudget = 100000;
constexpr double kOverfitLossCeiling = 0.05;   // nats per target token
constexpr double kOverfitBleuFloor = 90.0;
constexpr int kDirectionalWinsNeeded = 4;      // out of 5 seeds

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Mat<double> random_logits(mt::Rng& rng, int rows, int cols, double scale) {
  Mat<double> m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.next_normal();
  }
  return m;
}

std::vector<int> random_targets(mt::Rng& rng, int rows, int vocab) {
  std::vector<int> t(rows);
  bool any_scored = false;
  for (int& id : t) {
    id = static_cast<int>(rng.next_below(vocab));
    any_scored = any_scored || id != 0;
  }
  if (!any_scored) t[0] = 1;  // keep at least one non-ignored position
  return t;
}

// Plain cross-entropy restated from the definition via log-sum-exp,
// averaged over non-ignored targets.
double plain_ce(const Mat<double>& logits, const std::vector<int>& targets) {
  double sum = 0.0;
  size_t n = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (targets[r] == 0) continue;
    const double mx = logits.row(r).maxCoeff();
    const double lse =
        std::log((logits.row(r).array() - mx).exp().sum()) + mx;
    sum += lse - logits(r, targets[r]);
    ++n;
  }
  return sum / static_cast<double>(n);
}

// --- 1. focal loss at gamma=0, alpha=1 reduces to plain cross-entropy ----

Outcome check_focal_identity() {
  mt::Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int rows = 1 + static_cast<int>(rng.next_below(8));
    const int vocab = 2 + static_cast<int>(rng.next_below(31));
    const Mat<double> logits = random_logits(rng, rows, vocab, 3.0);
    const auto targets = random_targets(rng, rows, vocab);
    const auto focal = mt::focal_loss(
        logits, targets, mt::FocalConfig{.alpha = 1.0, .gamma = 0.0});
    worst = std::max(worst, std::abs(focal.loss - plain_ce(logits, targets)));
  }
  return {worst < kFocalIdentityTol,
          "max |focal - ce| = " + fmt(worst) + " over 100 instances"};
}

// --- 2. focal loss point value at p_t = 0.5, alpha = 0.5, gamma = 1 ------

Outcome check_focal_point_value() {
  Mat<double> logits(1, 2);
  logits << 0.0, 0.0;  // softmax puts exactly 0.5 on the target
  const auto r = mt::focal_loss(
      logits, {1}, mt::FocalConfig{.alpha = 0.5, .gamma = 1.0});
  const double want = 0.25 * std::log(2.0);
  const double diff = std::abs(r.loss - want);
  return {diff < kFocalPointTol,
          "got " + fmt(r.loss) + ", want 0.25*ln 2 = " + fmt(want) +
              ", |diff| = " + fmt(diff)};
}

// --- 3. analytic gradients match central finite differences --------------

double criterion_fd_worst(bool focal_kind, uint64_t seed) {
  mt::Rng rng(seed);
  const double h = 1e-5;
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const int rows = 3 + static_cast<int>(rng.next_below(4));
    const int vocab = 5 + static_cast<int>(rng.next_below(5));
    Mat<double> logits = random_logits(rng, rows, vocab, 2.0);
    const auto targets = random_targets(rng, rows, vocab);
    const mt::SmoothedCeConfig ce_cfg{.epsilon = 0.2};
    const mt::FocalConfig fo_cfg{.alpha = 0.5,
                                 .gamma = inst % 2 ? 2.0 : 1.0};
    auto loss_of = [&](const Mat<double>& L) {
      return focal_kind ? mt::focal_loss(L, targets, fo_cfg).loss
                        : mt::label_smoothed_ce(L, targets, ce_cfg).loss;
    };
    const Mat<double> grad =
        focal_kind ? mt::focal_loss(logits, targets, fo_cfg).grad_logits
                   : mt::label_smoothed_ce(logits, targets, ce_cfg)
                         .grad_logits;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < vocab; ++j) {
        Mat<double> up = logits, down = logits;
        up(i, j) += h;
        down(i, j) -= h;
        const double fd = (loss_of(up) - loss_of(down)) / (2.0 * h);
        const double an = grad(i, j);
        const double rel = std::abs(fd - an) /
                           std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

double model_fd_worst() {
  mt::ModelConfig c;
  c.num_layers = 2;
  c.hidden_size = 8;
  c.num_heads = 2;
  c.ffn_size = 12;
  c.max_positions = 10;
  c.dropout_rate = 0.0;
  c.vocab_size = 13;
  c.seed = 7;
  auto model = mt::init_model<double>(c);
  const std::vector<int> src = {5, 9, 3, 11};
  const std::vector<int> tgt = {4, 7, 10, 6};
  const std::vector<int> targets = {7, 10, 6, 3};
  const mt::SmoothedCeConfig ce_cfg{.epsilon = 0.1};

  auto loss_of = [&]() {
    return mt::label_smoothed_ce(mt::forward(model, src, tgt).logits,
                                 targets, ce_cfg)
        .loss;
  };
  auto fwd = mt::forward(model, src, tgt);
  auto ce = mt::label_smoothed_ce(fwd.logits, targets, ce_cfg);
  auto grads = mt::backward(model, fwd.tape, ce.grad_logits);

  auto named_grads = mt::collect_params(grads);
  auto named_params = mt::collect_params(model.params);
  mt::Rng dir_rng(99);
  const double step = 1e-3;
  double worst = 0.0;
  for (size_t t = 0; t < named_params.size(); ++t) {
    Mat<double>& param = *named_params[t].second;
    const Mat<double>& grad = *named_grads[t].second;
    Mat<double> dir(param.rows(), param.cols());
    for (Eigen::Index i = 0; i < dir.rows(); ++i) {
      for (Eigen::Index j = 0; j < dir.cols(); ++j) {
        dir(i, j) = dir_rng.next_normal();
      }
    }
    dir /= dir.norm();
    const Mat<double> saved = param;
    param = saved + step * dir;
    const double up = loss_of();
    param = saved - step * dir;
    const double down = loss_of();
    param = saved;
    const double fd = (up - down) / (2.0 * step);
    const double an = grad.cwiseProduct(dir).sum();
    worst = std::max(worst, std::abs(fd - an) /
                                std::max({std::abs(fd), std::abs(an), 1e-3}));
  }
  return worst;
}

Outcome check_gradients() {
  const double ce = criterion_fd_worst(false, 301);
  const double fo = criterion_fd_worst(true, 302);
  const double model = model_fd_worst();
  const bool ok =
      ce < kCriterionFdTol && fo < kCriterionFdTol && model < kModelFdTol;
  return {ok, "max rel err: smoothed ce " + fmt(ce) + ", focal " + fmt(fo) +
                  " (tol 1e-6); model " + fmt(model) + " (tol 1e-4)"};
}

// --- 4. corpus BLEU agrees with the brute-force counter ------------------

Outcome check_bleu_oracle() {
  static const char* words[] = {"sun",  "moon", "star", "wind",
                                "rain", "snow", "leaf", "tree",
                                "bird", "fish", "stone", "river"};
  mt::Rng rng(404);
  auto sentence = [&](size_t len) {
    std::vector<std::string> toks;
    for (size_t i = 0; i < len; ++i) toks.push_back(words[rng.next_below(12)]);
    return toks;
  };
  auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) {
      if (!s.empty()) s += ' ';
      s += t;
    }
    return s;
  };

  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const size_t n = 1 + rng.next_below(6);
    std::vector<std::string> hyps, refs;
    std::vector<std::vector<std::string>> hyp_toks, ref_toks;
    for (size_t s = 0; s < n; ++s) {
      auto ref = sentence(1 + rng.next_below(10));
      std::vector<std::string> hyp;
      if (rng.next_below(2) == 0) {
        hyp = ref;  // noisy copy: drop/substitute some tokens
        for (auto& tok : hyp) {
          if (rng.next_below(4) == 0) tok = words[rng.next_below(12)];
        }
        if (hyp.size() > 1 && rng.next_below(3) == 0) hyp.pop_back();
      } else {
        hyp = sentence(1 + rng.next_below(10));
      }
      hyps.push_back(join(hyp));
      refs.push_back(join(ref));
      hyp_toks.push_back(hyp);
      ref_toks.push_back(ref);
    }
    const auto got = mt::corpus_bleu(hyps, refs);
    const auto want = testsupport::oracle_corpus_bleu(hyp_toks, ref_toks);
    worst = std::max(worst, std::abs(got.bleu - want.bleu));
  }

  auto lines = std::vector<std::string>{"the cat sat on the mat",
                                        "a stitch in time saves nine",
                                        "many hands make light work"};
  const double self_score = mt::corpus_bleu(lines, lines).bleu;
  const bool ok = worst < kBleuOracleTol && self_score == 100.0;
  return {ok, "max |bleu - oracle| = " + fmt(worst) +
                  " over 1000 corpora; identical corpus = " +
                  fmt(self_score)};
}

// --- 5. tokenizer round-trip and Viterbi optimality ----------------------

Outcome check_tokenizer() {
  const auto lines = testsupport::synth_corpus(1000, 77);
  mt::UnigramTrainOptions opts;
  opts.vocab_size = 400;
  opts.langs = {"xx", "yy"};
  opts.seed = 11;
  const auto vocab = mt::train_unigram(lines, opts);
  size_t exact = 0;
  for (const auto& line : lines) {
    exact += mt::decode(vocab, mt::encode(vocab, line, "xx")) == line;
  }

  // Three content pieces plus the word-boundary marker; every string over
  // {a, b} up to length 8 against exhaustive segmentation search.
  const std::string sent = "\xe2\x96\x81";
  mt::SubwordVocab tiny;
  tiny.lang_tags = {"<xx>"};
  tiny.pieces.push_back({"ab", std::log(0.4)});
  tiny.pieces.push_back({"a", std::log(0.3)});
  tiny.pieces.push_back({"b", std::log(0.2)});
  tiny.pieces.push_back({sent, std::log(0.1)});
  tiny.finalize();
  std::map<std::string, double> piece_map;
  for (const auto& p : tiny.pieces) piece_map[p.surface] = p.log_prob;

  size_t viterbi_bad = 0, enumerated = 0;
  for (size_t len = 1; len <= 8; ++len) {
    for (size_t bits = 0; bits < (size_t{1} << len); ++bits) {
      std::string s;
      for (size_t i = 0; i < len; ++i) s += (bits >> i) & 1 ? 'b' : 'a';
      double got = 0.0;
      for (const auto& surface : mt::encode_pieces(tiny, s)) {
        got += piece_map.at(surface);
      }
      const double want = testsupport::best_segmentation_score(
          piece_map, mt::utf8_codepoints(sent + s));
      ++enumerated;
      viterbi_bad += std::abs(got - want) > 1e-12;
    }
  }
  const bool ok = exact == lines.size() && viterbi_bad == 0;
  return {ok, "round-trip " + std::to_string(exact) + "/" +
                  std::to_string(lines.size()) + " lines; " +
                  std::to_string(viterbi_bad) + " of " +
                  std::to_string(enumerated) +
                  " enumerated segmentations suboptimal"};
}

// --- 6. small model overfits a 50-pair copy task --------------------------

struct OverfitWorld {
  mt::ParallelCorpus data;  // copy task: target text equals source text
  mt::SubwordVocab vocab;
  mt::ModelConfig mc;
  mt::TrainConfig tc;
  mt::DecodeConfig decode{.beam_size = 2, .lenpen = 1.0, .max_len = 24};
};

OverfitWorld overfit_world() {
  OverfitWorld w;
  w.data.src_lang = "xx";
  w.data.tgt_lang = "yy";
  mt::Rng rng(mt::derive_seed(606, "copy_task"));
  std::vector<std::string> lines;
  for (int i = 0; i < 50; ++i) {
    const size_t len = 4 + rng.next_below(5);
    std::string line;
    for (size_t k = 0; k < len; ++k) {
      if (!line.empty()) line += ' ';
      line += testsupport::tgt_word(rng.next_below(12));
    }
    lines.push_back(line);
    w.data.pairs.push_back({line, line, mt::Provenance::real});
  }
  mt::UnigramTrainOptions opts;
  opts.vocab_size = 80;
  opts.langs = {"xx", "yy"};
  opts.seed = 13;
  w.vocab = mt::train_unigram(lines, opts);

  w.mc.num_layers = 2;
  w.mc.hidden_size = 32;
  w.mc.num_heads = 4;
  w.mc.ffn_size = 64;
  w.mc.max_positions = 24;
  w.mc.dropout_rate = 0.0;
  w.mc.vocab_size = static_cast<int>(w.vocab.size());
  w.mc.seed = 21;

  w.tc.learning_rate = 3e-3;
  w.tc.dropout = 0.0;
  w.tc.max_updates = 2000;
  w.tc.batch_size = 8;
  w.tc.validate_every = 200;
  w.tc.criterion.key = "smoothed_ce";
  w.tc.criterion.label_smoothing = 0.0;
  w.tc.seed = 22;
  return w;
}

struct OverfitRun {
  double loss = 0.0;
  double bleu = 0.0;
  mt::Checkpoint last;
};

OverfitRun run_overfit(const OverfitWorld& w) {
  auto model = mt::init_model<float>(w.mc);
  auto result = mt::train(model, w.data, w.data, w.vocab, w.tc);
  OverfitRun run;
  run.last = result.last;
  const mt::Seq2SeqModel<float> trained{result.last.config,
                                        result.last.params};
  run.loss = mt::evaluate_loss(
      trained, mt::encode_corpus(w.vocab, w.data, w.mc.max_positions),
      w.tc.criterion);
  run.bleu = mt::score_checkpoint(trained, w.vocab, w.data, w.decode).bleu;
  return run;
}

OverfitRun g_overfit;  // kept for the reproducibility check

Outcome check_overfit() {
  const OverfitWorld w = overfit_world();
  const size_t params = mt::param_count(w.mc);
  g_overfit = run_overfit(w);
  const bool ok = params <= kOverfitParamBudget &&
                  g_overfit.loss < kOverfitLossCeiling &&
                  g_overfit.bleu >= kOverfitBleuFloor;
  return {ok, std::to_string(params) + " params; train loss " +
                  fmt(g_overfit.loss) + " nats/token; copy BLEU " +
                  fmt(g_overfit.bleu)};
}

// --- 7. back-translation beats the small-corpus baseline -----------------

struct BtWorld {
  testsupport::ToyTask task;
  mt::ParallelCorpus train, valid, test;
  mt::MonolingualCorpus mono;
  mt::SubwordVocab vocab;
  mt::ModelConfig mc;
  mt::DecodeConfig eval_decode{.beam_size = 2, .lenpen = 1.0, .max_len = 24};
  mt::DecodeConfig synth_decode{.beam_size = 1, .lenpen = 1.0, .max_len = 24};
};

mt::TrainConfig directional_train(uint64_t max_updates) {
  mt::TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.dropout = 0.1;
  tc.max_updates = max_updates;
  tc.batch_size = 8;
  tc.validate_every = 200;
  return tc;
}

// Calibrated so the 44-pair baseline lands mid-range (about 30-60 BLEU)
// and the 1000 monolingual lines leave it clear headroom.
BtWorld bt_world() {
  BtWorld w;
  w.task = testsupport::child_task(28);
  w.train = testsupport::sample_corpus(w.task, "aa", "bb", 44, 1, 6, 701);
  w.valid = testsupport::sample_corpus(w.task, "aa", "bb", 16, 1, 6, 702);
  w.test = testsupport::sample_corpus(w.task, "aa", "bb", 50, 4, 6, 703);
  w.mono = testsupport::sample_mono(w.task, "bb", 1000, 1, 6, 704).mono;
  w.vocab = testsupport::toy_vocab(
      testsupport::corpus_lines(testsupport::full_table(w.task, "aa", "bb")),
      {"aa", "bb"}, 96);
  w.mc.num_layers = 1;
  w.mc.hidden_size = 32;
  w.mc.num_heads = 4;
  w.mc.ffn_size = 64;
  w.mc.max_positions = 24;
  w.mc.vocab_size = static_cast<int>(w.vocab.size());
  return w;
}

struct DirectionalPair {
  double weaker = 0.0;    // baseline / from-scratch
  double stronger = 0.0;  // back-translated / transfer-initialized
};

DirectionalPair run_bt_seed(const BtWorld& w, uint64_t seed) {
  DirectionalPair out;

  mt::ModelConfig base_mc = w.mc;
  base_mc.seed = mt::derive_seed(seed, "baseline_init");
  base_mc.dropout_rate = 0.1;
  mt::TrainConfig base_tc = directional_train(2000);
  base_tc.seed = mt::derive_seed(seed, "baseline_train");
  auto base_model = mt::init_model<float>(base_mc);
  auto base_run = mt::train(base_model, w.train, w.valid, w.vocab, base_tc);
  const mt::Seq2SeqModel<float> base_best{base_run.best.config,
                                          base_run.best.params};
  out.weaker =
      mt::score_checkpoint(base_best, w.vocab, w.test, w.eval_decode).bleu;

  mt::BtExperimentConfig bt;
  bt.train = w.train;
  bt.valid = w.valid;
  bt.test = w.test;
  bt.mono = w.mono;
  bt.model = w.mc;
  bt.model.seed = seed;
  bt.reverse_train = directional_train(2500);
  bt.reverse_train.seed = mt::derive_seed(seed, "reverse_train");
  bt.forward_train = directional_train(2500);
  bt.forward_train.criterion.key = "focal";
  bt.forward_train.seed = mt::derive_seed(seed, "forward_train");
  bt.synth_decode = w.synth_decode;
  bt.eval_decode = w.eval_decode;
  out.stronger = mt::run_bt_experiment(bt, w.vocab).test_bleu.bleu;
  return out;
}

std::vector<DirectionalPair> g_bt_runs;

std::string directional_detail(const std::vector<DirectionalPair>& runs,
                               int wins, const char* weaker_name,
                               const char* stronger_name) {
  std::string detail = std::to_string(wins) + "/5 seeds (" + weaker_name +
                       " vs " + stronger_name + ":";
  for (const auto& r : runs) {
    detail += " " + fmt(r.weaker) + "->" + fmt(r.stronger);
  }
  return detail + ")";
}

Outcome check_bt_directional() {
  const BtWorld w = bt_world();
  g_bt_runs.clear();
  int wins = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    g_bt_runs.push_back(run_bt_seed(w, seed));
    wins += g_bt_runs.back().stronger > g_bt_runs.back().weaker;
  }
  return {wins >= kDirectionalWinsNeeded,
          directional_detail(g_bt_runs, wins, "baseline", "bt")};
}

// --- 8. transfer initialization beats from-scratch training --------------

struct TransferWorld {
  testsupport::ToyTask child, parent;
  mt::ParallelCorpus parent_train, parent_valid;
  mt::ParallelCorpus child_train, child_valid, child_test;
  mt::SubwordVocab vocab;  // shared across all three languages
  mt::ModelConfig mc;
  mt::DecodeConfig decode{.beam_size = 2, .lenpen = 1.0, .max_len = 24};
};

TransferWorld transfer_world() {
  TransferWorld w;
  w.child = testsupport::child_task(24);
  w.parent = testsupport::parent_task(24, 12);
  w.parent_train =
      testsupport::sample_corpus(w.parent, "pp", "bb", 400, 1, 6, 801);
  w.parent_valid =
      testsupport::sample_corpus(w.parent, "pp", "bb", 16, 1, 6, 802);
  w.child_train =
      testsupport::sample_corpus(w.child, "aa", "bb", 60, 1, 6, 803);
  w.child_valid =
      testsupport::sample_corpus(w.child, "aa", "bb", 12, 1, 6, 804);
  w.child_test =
      testsupport::sample_corpus(w.child, "aa", "bb", 40, 4, 6, 805);
  auto lines = testsupport::corpus_lines(
      testsupport::full_table(w.child, "aa", "bb"));
  for (const auto& line : testsupport::corpus_lines(
           testsupport::full_table(w.parent, "pp", "bb"))) {
    lines.push_back(line);
  }
  w.vocab = testsupport::toy_vocab(lines, {"aa", "pp", "bb"}, 112);
  w.mc.num_layers = 1;
  w.mc.hidden_size = 32;
  w.mc.num_heads = 4;
  w.mc.ffn_size = 64;
  w.mc.max_positions = 24;
  w.mc.vocab_size = static_cast<int>(w.vocab.size());
  return w;
}

// Both arms share child_cfg (smoothed CE) so the comparison isolates the
// initialization; the budget lets from-scratch lift off zero on some seeds.
DirectionalPair run_transfer_seed(const TransferWorld& w, uint64_t seed) {
  DirectionalPair out;
  mt::TrainConfig child_cfg = directional_train(2400);
  child_cfg.seed = mt::derive_seed(seed, "child_train");

  mt::ModelConfig scratch_mc = w.mc;
  scratch_mc.seed = mt::derive_seed(seed, "scratch_init");
  scratch_mc.dropout_rate = 0.1;
  auto scratch_model = mt::init_model<float>(scratch_mc);
  auto scratch_run = mt::train(scratch_model, w.child_train, w.child_valid,
                               w.vocab, child_cfg);
  const mt::Seq2SeqModel<float> scratch_best{scratch_run.best.config,
                                             scratch_run.best.params};
  out.weaker =
      mt::score_checkpoint(scratch_best, w.vocab, w.child_test, w.decode)
          .bleu;

  mt::TransferExperimentConfig tx;
  tx.parent_train = w.parent_train;
  tx.parent_valid = w.parent_valid;
  tx.child_train = w.child_train;
  tx.child_valid = w.child_valid;
  tx.child_test = w.child_test;
  tx.model = w.mc;
  tx.model.seed = seed;
  tx.model.dropout_rate = 0.1;
  tx.parent_cfg = directional_train(2000);
  tx.parent_cfg.seed = mt::derive_seed(seed, "parent_train");
  tx.child_cfg = child_cfg;
  tx.decode = w.decode;
  out.stronger =
      mt::run_transfer_experiment(tx, w.vocab, w.vocab).test_bleu.bleu;
  return out;
}

std::vector<DirectionalPair> g_transfer_runs;

Outcome check_transfer_directional() {
  const TransferWorld w = transfer_world();
  g_transfer_runs.clear();
  int wins = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    g_transfer_runs.push_back(run_transfer_seed(w, seed));
    wins += g_transfer_runs.back().stronger >= g_transfer_runs.back().weaker;
  }
  return {wins >= kDirectionalWinsNeeded,
          directional_detail(g_transfer_runs, wins, "scratch", "transfer")};
}

// --- 9. bit-exact reruns and midpoint resume ------------------------------

bool same_params(const mt::Seq2SeqParams<float>& a,
                 const mt::Seq2SeqParams<float>& b) {
  std::vector<const Mat<float>*> pa, pb;
  mt::visit_params(a, [&](const std::string&, const Mat<float>& m) {
    pa.push_back(&m);
  });
  mt::visit_params(b, [&](const std::string&, const Mat<float>& m) {
    pb.push_back(&m);
  });
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->rows() != pb[i]->rows() || pa[i]->cols() != pb[i]->cols() ||
        std::memcmp(pa[i]->data(), pb[i]->data(),
                    sizeof(float) * static_cast<size_t>(pa[i]->size())) !=
            0) {
      return false;
    }
  }
  return true;
}

Outcome check_reproducibility() {
  std::vector<std::string> problems;

  const OverfitWorld ow = overfit_world();
  const OverfitRun overfit_again = run_overfit(ow);
  if (overfit_again.bleu != g_overfit.bleu ||
      overfit_again.loss != g_overfit.loss) {
    problems.push_back("overfit rerun diverged");
  }

  // Midpoint interrupt: half the budget, then resume to the full budget.
  mt::TrainConfig half_tc = ow.tc;
  half_tc.max_updates = ow.tc.max_updates / 2;
  auto half_model = mt::init_model<float>(ow.mc);
  auto half_run = mt::train(half_model, ow.data, ow.data, ow.vocab, half_tc);
  auto resumed_model = mt::init_model<float>(ow.mc);
  auto resumed_run = mt::train(resumed_model, ow.data, ow.data, ow.vocab,
                               ow.tc, &half_run.last);
  if (!same_params(resumed_run.last.params, g_overfit.last.params)) {
    problems.push_back("midpoint resume diverged from the straight run");
  }

  const BtWorld bw = bt_world();
  for (size_t i = 0; i < g_bt_runs.size(); ++i) {
    const auto again = run_bt_seed(bw, i + 1);
    if (again.weaker != g_bt_runs[i].weaker ||
        again.stronger != g_bt_runs[i].stronger) {
      problems.push_back("bt rerun diverged at seed " + std::to_string(i + 1));
    }
  }

  const TransferWorld tw = transfer_world();
  for (size_t i = 0; i < g_transfer_runs.size(); ++i) {
    const auto again = run_transfer_seed(tw, i + 1);
    if (again.weaker != g_transfer_runs[i].weaker ||
        again.stronger != g_transfer_runs[i].stronger) {
      problems.push_back("transfer rerun diverged at seed " +
                         std::to_string(i + 1));
    }
  }

  if (problems.empty()) {
    return {true,
            "reruns of the overfit, bt, and transfer checks are bit-exact; "
            "midpoint resume matches the straight run"};
  }
  std::string detail;
  for (const auto& p : problems) {
    if (!detail.empty()) detail += "; ";
    detail += p;
  }
  return {false, detail};
}

}  // namespace

int main() {
  struct Check {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Check checks[] = {
      {1, "focal loss at gamma=0, alpha=1 equals plain cross-entropy",
       check_focal_identity},
      {2, "focal loss point value at p_t=0.5, alpha=0.5, gamma=1",
       check_focal_point_value},
      {3, "criterion and model gradients match finite differences",
       check_gradients},
      {4, "corpus BLEU matches the brute-force oracle", check_bleu_oracle},
      {5, "tokenizer round-trip and Viterbi optimality", check_tokenizer},
      {6, "small model overfits a 50-pair copy task", check_overfit},
      {7, "back-translation beats the baseline on 4 of 5 seeds",
       check_bt_directional},
      {8, "transfer init matches or beats from-scratch on 4 of 5 seeds",
       check_transfer_directional},
      {9, "bit-exact reruns and midpoint resume", check_reproducibility},
  };

  int failures = 0;
  for (const auto& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check.fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    char elapsed[32];
    std::snprintf(elapsed, sizeof(elapsed), "%.2f", secs);
    std::cout << (outcome.ok ? "[PASS] " : "[FAIL] ") << check.id << ". "
              << check.name << ": " << outcome.detail << " [" << elapsed
              << "s]\n"
              << std::flush;
    failures += !outcome.ok;
  }
  return failures;
}
