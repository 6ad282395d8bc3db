#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mt/error.hpp"
#include "mt/rng.hpp"
#include "mt/tensor.hpp"

namespace mt {

// Project-wide token id layout (fixed by the vocabulary format):
// 0 pad, 1 unk, 2 bos, 3 eos, then language tags, then pieces.
constexpr int kPadTokenId = 0;
constexpr int kEosTokenId = 3;

struct ModelConfig {
  int num_layers = 2;  // encoder count == decoder count
  int hidden_size = 64;
  int num_heads = 4;
  int ffn_size = 256;
  int max_positions = 128;
  double dropout_rate = 0.3;
  int vocab_size = 0;
  uint64_t seed = 1;

  bool operator==(const ModelConfig&) const = default;
};

inline void validate_config(const ModelConfig& c) {
  if (c.num_layers < 1 || c.hidden_size < 1 || c.num_heads < 1 ||
      c.ffn_size < 1 || c.max_positions < 1 || c.vocab_size < 1) {
    throw config_error("model config sizes must all be >= 1");
  }
  if (c.hidden_size % c.num_heads != 0) {
    throw config_error("hidden_size " + std::to_string(c.hidden_size) +
                       " is not divisible by num_heads " +
                       std::to_string(c.num_heads));
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw config_error("dropout_rate must lie in [0, 1)");
  }
}

template <typename S>
struct Seq2SeqParams {
  struct LayerNorm {
    Mat<S> gain, bias;  // 1 x d
  };
  struct Attention {
    Mat<S> wq, wk, wv, wo;  // d x d
    Mat<S> bq, bk, bv, bo;  // 1 x d
  };
  struct Ffn {
    Mat<S> w1;  // d x ffn
    Mat<S> b1;  // 1 x ffn
    Mat<S> w2;  // ffn x d
    Mat<S> b2;  // 1 x d
  };
  struct EncLayer {
    LayerNorm ln1;
    Attention attn;
    LayerNorm ln2;
    Ffn ffn;
  };
  struct DecLayer {
    LayerNorm ln1;
    Attention self_attn;
    LayerNorm ln2;
    Attention cross_attn;
    LayerNorm ln3;
    Ffn ffn;
  };

  Mat<S> tok_embed;  // vocab x d, shared by encoder, decoder, output proj
  Mat<S> enc_pos;    // max_positions x d
  Mat<S> dec_pos;    // max_positions x d
  std::vector<EncLayer> enc;
  LayerNorm enc_ln;
  std::vector<DecLayer> dec;
  LayerNorm dec_ln;
  Mat<S> out_bias;  // 1 x vocab
};

// Visits every parameter tensor in a fixed order with a stable name.
// This order defines optimizer-state pairing and the checkpoint layout.
template <typename S, typename F>
void visit_params(Seq2SeqParams<S>& p, F&& f) {
  auto ln = [&](const std::string& prefix,
                typename Seq2SeqParams<S>::LayerNorm& l) {
    f(prefix + ".gain", l.gain);
    f(prefix + ".bias", l.bias);
  };
  auto attn = [&](const std::string& prefix,
                  typename Seq2SeqParams<S>::Attention& a) {
    f(prefix + ".wq", a.wq);
    f(prefix + ".bq", a.bq);
    f(prefix + ".wk", a.wk);
    f(prefix + ".bk", a.bk);
    f(prefix + ".wv", a.wv);
    f(prefix + ".bv", a.bv);
    f(prefix + ".wo", a.wo);
    f(prefix + ".bo", a.bo);
  };
  auto ffn = [&](const std::string& prefix,
                 typename Seq2SeqParams<S>::Ffn& w) {
    f(prefix + ".w1", w.w1);
    f(prefix + ".b1", w.b1);
    f(prefix + ".w2", w.w2);
    f(prefix + ".b2", w.b2);
  };

  f("tok_embed", p.tok_embed);
  f("enc_pos", p.enc_pos);
  f("dec_pos", p.dec_pos);
  for (size_t i = 0; i < p.enc.size(); ++i) {
    const std::string base = "enc." + std::to_string(i);
    ln(base + ".ln1", p.enc[i].ln1);
    attn(base + ".attn", p.enc[i].attn);
    ln(base + ".ln2", p.enc[i].ln2);
    ffn(base + ".ffn", p.enc[i].ffn);
  }
  ln("enc_ln", p.enc_ln);
  for (size_t i = 0; i < p.dec.size(); ++i) {
    const std::string base = "dec." + std::to_string(i);
    ln(base + ".ln1", p.dec[i].ln1);
    attn(base + ".self_attn", p.dec[i].self_attn);
    ln(base + ".ln2", p.dec[i].ln2);
    attn(base + ".cross_attn", p.dec[i].cross_attn);
    ln(base + ".ln3", p.dec[i].ln3);
    ffn(base + ".ffn", p.dec[i].ffn);
  }
  ln("dec_ln", p.dec_ln);
  f("out_bias", p.out_bias);
}

template <typename S, typename F>
void visit_params(const Seq2SeqParams<S>& p, F&& f) {
  visit_params(const_cast<Seq2SeqParams<S>&>(p),
               [&](const std::string& name, Mat<S>& m) {
                 f(name, static_cast<const Mat<S>&>(m));
               });
}

template <typename S>
std::vector<std::pair<std::string, Mat<S>*>> collect_params(
    Seq2SeqParams<S>& p) {
  std::vector<std::pair<std::string, Mat<S>*>> out;
  visit_params(p, [&](const std::string& name, Mat<S>& m) {
    out.push_back({name, &m});
  });
  return out;
}

template <typename S>
Seq2SeqParams<S> allocate_params(const ModelConfig& c) {
  validate_config(c);
  const int d = c.hidden_size;
  Seq2SeqParams<S> p;
  p.tok_embed.setZero(c.vocab_size, d);
  p.enc_pos.setZero(c.max_positions, d);
  p.dec_pos.setZero(c.max_positions, d);
  p.out_bias.setZero(1, c.vocab_size);
  auto make_ln = [&](typename Seq2SeqParams<S>::LayerNorm& l) {
    l.gain.setZero(1, d);
    l.bias.setZero(1, d);
  };
  auto make_attn = [&](typename Seq2SeqParams<S>::Attention& a) {
    a.wq.setZero(d, d);
    a.wk.setZero(d, d);
    a.wv.setZero(d, d);
    a.wo.setZero(d, d);
    a.bq.setZero(1, d);
    a.bk.setZero(1, d);
    a.bv.setZero(1, d);
    a.bo.setZero(1, d);
  };
  auto make_ffn = [&](typename Seq2SeqParams<S>::Ffn& w) {
    w.w1.setZero(d, c.ffn_size);
    w.b1.setZero(1, c.ffn_size);
    w.w2.setZero(c.ffn_size, d);
    w.b2.setZero(1, d);
  };
  p.enc.resize(c.num_layers);
  p.dec.resize(c.num_layers);
  for (auto& layer : p.enc) {
    make_ln(layer.ln1);
    make_attn(layer.attn);
    make_ln(layer.ln2);
    make_ffn(layer.ffn);
  }
  make_ln(p.enc_ln);
  for (auto& layer : p.dec) {
    make_ln(layer.ln1);
    make_attn(layer.self_attn);
    make_ln(layer.ln2);
    make_attn(layer.cross_attn);
    make_ln(layer.ln3);
    make_ffn(layer.ffn);
  }
  make_ln(p.dec_ln);
  return p;
}

template <typename S>
Seq2SeqParams<S> zeros_like(const Seq2SeqParams<S>& p) {
  Seq2SeqParams<S> z = p;
  visit_params(z, [](const std::string&, Mat<S>& m) { m.setZero(); });
  return z;
}

template <typename S>
struct Seq2SeqModel {
  ModelConfig config;
  Seq2SeqParams<S> params;
};

inline size_t param_count(const ModelConfig& c) {
  auto p = allocate_params<float>(c);
  size_t total = 0;
  visit_params(p, [&](const std::string&, const Mat<float>& m) {
    total += static_cast<size_t>(m.size());
  });
  return total;
}

namespace detail {

inline bool name_is_gain(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, ".gain") == 0;
}

inline bool name_is_bias(const std::string& name) {
  if (name == "out_bias") return true;
  static const char* suffixes[] = {".bias", ".bq", ".bk", ".bv",
                                   ".bo",   ".b1", ".b2"};
  for (const char* s : suffixes) {
    const size_t len = std::char_traits<char>::length(s);
    if (name.size() >= len &&
        name.compare(name.size() - len, len, s) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Deterministic initialization: weights and embeddings N(0, 0.02^2) drawn
// in visitation order from one stream, layer-norm gains 1, all biases 0.
template <typename S>
Seq2SeqModel<S> init_model(const ModelConfig& config) {
  Seq2SeqModel<S> model;
  model.config = config;
  model.params = allocate_params<S>(config);
  Rng rng(derive_seed(config.seed, "model_init"));
  visit_params(model.params, [&](const std::string& name, Mat<S>& m) {
    if (detail::name_is_gain(name)) {
      m.setOnes();
    } else if (detail::name_is_bias(name)) {
      m.setZero();
    } else {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          m(i, j) = static_cast<S>(0.02 * rng.next_normal());
        }
      }
    }
  });
  return model;
}

// ---------------------------------------------------------------------------
// Forward pass with an explicit tape of cached activations.

template <typename S>
struct LnTape {
  Mat<S> xhat;     // L x d
  Mat<S> inv_std;  // L x 1
  Mat<S> out;      // L x d
};

template <typename S>
struct AttnTape {
  Mat<S> q, k, v;             // post-projection
  std::vector<Mat<S>> probs;  // one Lq x Lk matrix per head
  Mat<S> ctx;                 // Lq x d, input to the output projection
  Mat<S> drop_mask;           // empty when dropout is off
};

template <typename S>
struct FfnTape {
  Mat<S> pre_act;  // L x ffn
  Mat<S> act;      // L x ffn
  Mat<S> drop_mask;
};

template <typename S>
struct EncLayerTape {
  LnTape<S> ln1, ln2;
  AttnTape<S> attn;
  FfnTape<S> ffn;
};

template <typename S>
struct DecLayerTape {
  LnTape<S> ln1, ln2, ln3;
  AttnTape<S> self_attn, cross_attn;
  FfnTape<S> ffn;
};

template <typename S>
struct Tape {
  std::vector<int> src_ids, tgt_ids;
  bool train_mode = false;
  Mat<S> enc_embed_drop, dec_embed_drop;
  std::vector<EncLayerTape<S>> enc;
  LnTape<S> enc_ln;
  Mat<S> memory;  // encoder output after the final norm
  std::vector<DecLayerTape<S>> dec;
  LnTape<S> dec_ln;  // .out feeds the output projection
};

template <typename S>
struct ForwardResult {
  Mat<S> logits;  // |tgt| x vocab
  Tape<S> tape;
};

namespace detail {

constexpr double kMaskScore = -1e30;
constexpr double kLnEps = 1e-5;

template <typename S>
Mat<S> layer_norm_fwd(const Mat<S>& x,
                      const typename Seq2SeqParams<S>::LayerNorm& ln,
                      LnTape<S>& t) {
  const Eigen::Index rows = x.rows(), d = x.cols();
  t.xhat.resize(rows, d);
  t.inv_std.resize(rows, 1);
  Mat<S> out(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const S mu = x.row(i).mean();
    const auto centered = x.row(i).array() - mu;
    const S var = centered.square().sum() / static_cast<S>(d);
    const S inv = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    t.inv_std(i, 0) = inv;
    t.xhat.row(i) = (centered * inv).matrix();
    out.row(i) = (t.xhat.row(i).array() * ln.gain.row(0).array() +
                  ln.bias.row(0).array())
                     .matrix();
  }
  t.out = out;
  return out;
}

template <typename S>
Mat<S> layer_norm_bwd(const Mat<S>& dy,
                      const typename Seq2SeqParams<S>::LayerNorm& ln,
                      const LnTape<S>& t,
                      typename Seq2SeqParams<S>::LayerNorm& g) {
  const Eigen::Index rows = dy.rows(), d = dy.cols();
  Mat<S> dx(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    g.gain.row(0).array() +=
        dy.row(i).array() * t.xhat.row(i).array();
    g.bias.row(0).array() += dy.row(i).array();
    const auto dxhat = (dy.row(i).array() * ln.gain.row(0).array()).eval();
    const S mean_dxhat = dxhat.sum() / static_cast<S>(d);
    const S mean_dxhat_xhat =
        (dxhat * t.xhat.row(i).array()).sum() / static_cast<S>(d);
    dx.row(i) = (t.inv_std(i, 0) *
                 (dxhat - mean_dxhat - t.xhat.row(i).array() * mean_dxhat_xhat))
                    .matrix();
  }
  return dx;
}

// Inverted dropout; masks are cached so backward is exact.
template <typename S>
void dropout_fwd(Mat<S>& x, double rate, bool train, Rng& rng,
                 Mat<S>& mask_out) {
  if (!train || rate <= 0.0) {
    mask_out.resize(0, 0);
    return;
  }
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  mask_out.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      mask_out(i, j) = rng.next_double() < rate ? S(0) : keep_scale;
      x(i, j) *= mask_out(i, j);
    }
  }
}

template <typename S>
Mat<S> dropout_bwd(const Mat<S>& dy, const Mat<S>& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

template <typename S>
void softmax_rows_inplace(Mat<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp().matrix();
    m.row(i) /= m.row(i).sum();
  }
}

// q_src attends over kv_src. key_pad marks key positions excluded from
// attention; causal restricts query i to keys <= i (self-attention only).
template <typename S>
Mat<S> attention_fwd(const Mat<S>& q_src, const Mat<S>& kv_src,
                     const typename Seq2SeqParams<S>::Attention& w,
                     int num_heads, bool causal,
                     const std::vector<char>& key_pad, AttnTape<S>& t) {
  const Eigen::Index lq = q_src.rows(), lk = kv_src.rows(), d = q_src.cols();
  const Eigen::Index dh = d / num_heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  t.q = q_src * w.wq;
  t.q.rowwise() += w.bq.row(0);
  t.k = kv_src * w.wk;
  t.k.rowwise() += w.bk.row(0);
  t.v = kv_src * w.wv;
  t.v.rowwise() += w.bv.row(0);

  t.probs.assign(num_heads, Mat<S>());
  t.ctx.resize(lq, d);
  for (int h = 0; h < num_heads; ++h) {
    const auto qh = t.q.middleCols(h * dh, dh);
    const auto kh = t.k.middleCols(h * dh, dh);
    const auto vh = t.v.middleCols(h * dh, dh);
    Mat<S> scores = (qh * kh.transpose()) * scale;
    for (Eigen::Index j = 0; j < lk; ++j) {
      if (!key_pad.empty() && key_pad[static_cast<size_t>(j)]) {
        scores.col(j).setConstant(static_cast<S>(kMaskScore));
      }
    }
    if (causal) {
      for (Eigen::Index i = 0; i < lq; ++i) {
        for (Eigen::Index j = i + 1; j < lk; ++j) {
          scores(i, j) = static_cast<S>(kMaskScore);
        }
      }
    }
    softmax_rows_inplace(scores);
    t.probs[h] = scores;
    t.ctx.middleCols(h * dh, dh) = t.probs[h] * vh;
  }
  Mat<S> out = t.ctx * w.wo;
  out.rowwise() += w.bo.row(0);
  return out;
}

template <typename S>
void attention_bwd(const Mat<S>& dout, const Mat<S>& q_src,
                   const Mat<S>& kv_src,
                   const typename Seq2SeqParams<S>::Attention& w,
                   const AttnTape<S>& t, int num_heads,
                   typename Seq2SeqParams<S>::Attention& g, Mat<S>& dq_src,
                   Mat<S>& dkv_src) {
  const Eigen::Index lq = q_src.rows(), lk = kv_src.rows(), d = q_src.cols();
  const Eigen::Index dh = d / num_heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  g.wo += t.ctx.transpose() * dout;
  g.bo += dout.colwise().sum();
  const Mat<S> dctx = dout * w.wo.transpose();

  Mat<S> dq = Mat<S>::Zero(lq, d);
  Mat<S> dk = Mat<S>::Zero(lk, d);
  Mat<S> dv = Mat<S>::Zero(lk, d);
  for (int h = 0; h < num_heads; ++h) {
    const auto qh = t.q.middleCols(h * dh, dh);
    const auto kh = t.k.middleCols(h * dh, dh);
    const auto vh = t.v.middleCols(h * dh, dh);
    const auto dctx_h = dctx.middleCols(h * dh, dh);
    const Mat<S>& probs = t.probs[h];

    Mat<S> dprobs = dctx_h * vh.transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * dctx_h;

    Mat<S> dscores(lq, lk);
    for (Eigen::Index i = 0; i < lq; ++i) {
      const S dot = (dprobs.row(i).array() * probs.row(i).array()).sum();
      dscores.row(i) =
          (probs.row(i).array() * (dprobs.row(i).array() - dot)).matrix();
    }
    dq.middleCols(h * dh, dh) = (dscores * kh) * scale;
    dk.middleCols(h * dh, dh) = (dscores.transpose() * qh) * scale;
  }

  g.wq += q_src.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk += kv_src.transpose() * dk;
  g.bk += dk.colwise().sum();
  g.wv += kv_src.transpose() * dv;
  g.bv += dv.colwise().sum();
  dq_src += dq * w.wq.transpose();
  dkv_src += dk * w.wk.transpose() + dv * w.wv.transpose();
}

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::sqrt(S(2))));
}

template <typename S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::sqrt(S(2))));
  const S pdf = std::exp(S(-0.5) * x * x) /
                std::sqrt(S(2) * static_cast<S>(EIGEN_PI));
  return cdf + x * pdf;
}

template <typename S>
Mat<S> ffn_fwd(const Mat<S>& x, const typename Seq2SeqParams<S>::Ffn& w,
               FfnTape<S>& t) {
  t.pre_act = x * w.w1;
  t.pre_act.rowwise() += w.b1.row(0);
  t.act = t.pre_act.unaryExpr([](S v) { return gelu(v); });
  Mat<S> out = t.act * w.w2;
  out.rowwise() += w.b2.row(0);
  return out;
}

template <typename S>
Mat<S> ffn_bwd(const Mat<S>& dout, const Mat<S>& x,
               const typename Seq2SeqParams<S>::Ffn& w, const FfnTape<S>& t,
               typename Seq2SeqParams<S>::Ffn& g) {
  g.w2 += t.act.transpose() * dout;
  g.b2 += dout.colwise().sum();
  Mat<S> dact = dout * w.w2.transpose();
  Mat<S> dpre =
      dact.cwiseProduct(t.pre_act.unaryExpr([](S v) { return gelu_grad(v); }));
  g.w1 += x.transpose() * dpre;
  g.b1 += dpre.colwise().sum();
  return dpre * w.w1.transpose();
}

template <typename S>
void check_ids(const std::vector<int>& ids, const ModelConfig& c,
               const char* which) {
  if (ids.empty()) {
    throw config_error(std::string(which) + " sequence is empty");
  }
  if (ids.size() > static_cast<size_t>(c.max_positions)) {
    throw config_error(std::string(which) + " length " +
                       std::to_string(ids.size()) + " exceeds max_positions " +
                       std::to_string(c.max_positions));
  }
  for (int id : ids) {
    if (id < 0 || id >= c.vocab_size) {
      throw config_error(std::string(which) + " id " + std::to_string(id) +
                         " outside vocab of size " +
                         std::to_string(c.vocab_size));
    }
  }
}

template <typename S>
Mat<S> embed_fwd(const Mat<S>& tok_embed, const Mat<S>& pos,
                 const std::vector<int>& ids) {
  const Eigen::Index d = tok_embed.cols();
  const S scale = std::sqrt(static_cast<S>(d));
  Mat<S> x(static_cast<Eigen::Index>(ids.size()), d);
  for (size_t t = 0; t < ids.size(); ++t) {
    x.row(static_cast<Eigen::Index>(t)) =
        tok_embed.row(ids[t]) * scale +
        pos.row(static_cast<Eigen::Index>(t));
  }
  return x;
}

template <typename S>
std::vector<char> pad_mask(const std::vector<int>& ids) {
  std::vector<char> mask(ids.size(), 0);
  bool any = false;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kPadTokenId) {
      mask[i] = 1;
      any = true;
    }
  }
  if (!any) mask.clear();  // empty mask = nothing masked
  return mask;
}

template <typename S>
Mat<S> encoder_fwd(const Seq2SeqModel<S>& model, const std::vector<int>& src,
                   bool train, Rng& rng, Tape<S>& tape) {
  const auto& p = model.params;
  const double rate = model.config.dropout_rate;
  Mat<S> x = embed_fwd<S>(p.tok_embed, p.enc_pos, src);
  dropout_fwd(x, rate, train, rng, tape.enc_embed_drop);
  tape.enc.resize(p.enc.size());
  const std::vector<char> key_pad = pad_mask<S>(src);
  for (size_t l = 0; l < p.enc.size(); ++l) {
    auto& lt = tape.enc[l];
    const auto& lw = p.enc[l];
    Mat<S> normed = layer_norm_fwd<S>(x, lw.ln1, lt.ln1);
    Mat<S> attn_out = attention_fwd<S>(normed, normed, lw.attn,
                                       model.config.num_heads,
                                       /*causal=*/false, key_pad, lt.attn);
    dropout_fwd(attn_out, rate, train, rng, lt.attn.drop_mask);
    x += attn_out;
    Mat<S> normed2 = layer_norm_fwd<S>(x, lw.ln2, lt.ln2);
    Mat<S> ffn_out = ffn_fwd<S>(normed2, lw.ffn, lt.ffn);
    dropout_fwd(ffn_out, rate, train, rng, lt.ffn.drop_mask);
    x += ffn_out;
  }
  tape.memory = layer_norm_fwd<S>(x, p.enc_ln, tape.enc_ln);
  return tape.memory;
}

template <typename S>
Mat<S> decoder_fwd(const Seq2SeqModel<S>& model, const Mat<S>& memory,
                   const std::vector<int>& src, const std::vector<int>& tgt,
                   bool train, Rng& rng, Tape<S>& tape) {
  const auto& p = model.params;
  const double rate = model.config.dropout_rate;
  Mat<S> y = embed_fwd<S>(p.tok_embed, p.dec_pos, tgt);
  dropout_fwd(y, rate, train, rng, tape.dec_embed_drop);
  tape.dec.resize(p.dec.size());
  const std::vector<char> self_pad = pad_mask<S>(tgt);
  const std::vector<char> mem_pad = pad_mask<S>(src);
  for (size_t l = 0; l < p.dec.size(); ++l) {
    auto& lt = tape.dec[l];
    const auto& lw = p.dec[l];
    Mat<S> normed = layer_norm_fwd<S>(y, lw.ln1, lt.ln1);
    Mat<S> self_out = attention_fwd<S>(normed, normed, lw.self_attn,
                                       model.config.num_heads,
                                       /*causal=*/true, self_pad,
                                       lt.self_attn);
    dropout_fwd(self_out, rate, train, rng, lt.self_attn.drop_mask);
    y += self_out;
    Mat<S> normed2 = layer_norm_fwd<S>(y, lw.ln2, lt.ln2);
    Mat<S> cross_out = attention_fwd<S>(normed2, memory, lw.cross_attn,
                                        model.config.num_heads,
                                        /*causal=*/false, mem_pad,
                                        lt.cross_attn);
    dropout_fwd(cross_out, rate, train, rng, lt.cross_attn.drop_mask);
    y += cross_out;
    Mat<S> normed3 = layer_norm_fwd<S>(y, lw.ln3, lt.ln3);
    Mat<S> ffn_out = ffn_fwd<S>(normed3, lw.ffn, lt.ffn);
    dropout_fwd(ffn_out, rate, train, rng, lt.ffn.drop_mask);
    y += ffn_out;
  }
  Mat<S> h = layer_norm_fwd<S>(y, p.dec_ln, tape.dec_ln);
  Mat<S> logits = h * p.tok_embed.transpose();
  logits.rowwise() += p.out_bias.row(0);
  return logits;
}

}  // namespace detail

template <typename S>
ForwardResult<S> forward(const Seq2SeqModel<S>& model,
                         const std::vector<int>& src_ids,
                         const std::vector<int>& tgt_prefix_ids,
                         bool train_mode = false, uint64_t dropout_seed = 0) {
  detail::check_ids<S>(src_ids, model.config, "source");
  detail::check_ids<S>(tgt_prefix_ids, model.config, "target prefix");
  ForwardResult<S> r;
  r.tape.src_ids = src_ids;
  r.tape.tgt_ids = tgt_prefix_ids;
  r.tape.train_mode = train_mode;
  Rng rng(dropout_seed);
  Mat<S> memory = detail::encoder_fwd(model, src_ids, train_mode, rng, r.tape);
  r.logits = detail::decoder_fwd(model, memory, src_ids, tgt_prefix_ids,
                                 train_mode, rng, r.tape);
  return r;
}

// Reverse pass over the tape. Returns gradients for every parameter;
// tensors whose name contains any freeze pattern are zeroed.
template <typename S>
Seq2SeqParams<S> backward(const Seq2SeqModel<S>& model, const Tape<S>& tape,
                          const Mat<S>& dlogits,
                          const std::vector<std::string>& freeze_patterns = {}) {
  const auto& p = model.params;
  const Eigen::Index d = model.config.hidden_size;
  const S scale = std::sqrt(static_cast<S>(d));
  Seq2SeqParams<S> g = zeros_like(p);

  // Output projection: logits = h E^T + out_bias.
  const Mat<S>& h = tape.dec_ln.out;
  g.tok_embed += dlogits.transpose() * h;
  g.out_bias += dlogits.colwise().sum();
  Mat<S> dy = detail::layer_norm_bwd<S>(Mat<S>(dlogits * p.tok_embed),
                                        p.dec_ln, tape.dec_ln, g.dec_ln);

  Mat<S> dmemory = Mat<S>::Zero(tape.memory.rows(), tape.memory.cols());
  for (size_t li = p.dec.size(); li-- > 0;) {
    const auto& lw = p.dec[li];
    const auto& lt = tape.dec[li];
    auto& lg = g.dec[li];

    Mat<S> dffn_out = detail::dropout_bwd<S>(dy, lt.ffn.drop_mask);
    Mat<S> dnormed3 =
        detail::ffn_bwd<S>(dffn_out, lt.ln3.out, lw.ffn, lt.ffn, lg.ffn);
    dy += detail::layer_norm_bwd<S>(dnormed3, lw.ln3, lt.ln3, lg.ln3);

    Mat<S> dcross_out = detail::dropout_bwd<S>(dy, lt.cross_attn.drop_mask);
    Mat<S> dnormed2 = Mat<S>::Zero(dy.rows(), d);
    detail::attention_bwd<S>(dcross_out, lt.ln2.out, tape.memory,
                             lw.cross_attn, lt.cross_attn,
                             model.config.num_heads, lg.cross_attn, dnormed2,
                             dmemory);
    dy += detail::layer_norm_bwd<S>(dnormed2, lw.ln2, lt.ln2, lg.ln2);

    Mat<S> dself_out = detail::dropout_bwd<S>(dy, lt.self_attn.drop_mask);
    Mat<S> dnormed1 = Mat<S>::Zero(dy.rows(), d);
    detail::attention_bwd<S>(dself_out, lt.ln1.out, lt.ln1.out, lw.self_attn,
                             lt.self_attn, model.config.num_heads,
                             lg.self_attn, dnormed1, dnormed1);
    dy += detail::layer_norm_bwd<S>(dnormed1, lw.ln1, lt.ln1, lg.ln1);
  }
  dy = detail::dropout_bwd<S>(dy, tape.dec_embed_drop);
  for (size_t t = 0; t < tape.tgt_ids.size(); ++t) {
    g.tok_embed.row(tape.tgt_ids[t]) +=
        dy.row(static_cast<Eigen::Index>(t)) * scale;
    g.dec_pos.row(static_cast<Eigen::Index>(t)) +=
        dy.row(static_cast<Eigen::Index>(t));
  }

  Mat<S> dx =
      detail::layer_norm_bwd<S>(dmemory, p.enc_ln, tape.enc_ln, g.enc_ln);
  for (size_t li = p.enc.size(); li-- > 0;) {
    const auto& lw = p.enc[li];
    const auto& lt = tape.enc[li];
    auto& lg = g.enc[li];

    Mat<S> dffn_out = detail::dropout_bwd<S>(dx, lt.ffn.drop_mask);
    Mat<S> dnormed2 =
        detail::ffn_bwd<S>(dffn_out, lt.ln2.out, lw.ffn, lt.ffn, lg.ffn);
    dx += detail::layer_norm_bwd<S>(dnormed2, lw.ln2, lt.ln2, lg.ln2);

    Mat<S> dattn_out = detail::dropout_bwd<S>(dx, lt.attn.drop_mask);
    Mat<S> dnormed1 = Mat<S>::Zero(dx.rows(), d);
    detail::attention_bwd<S>(dattn_out, lt.ln1.out, lt.ln1.out, lw.attn,
                             lt.attn, model.config.num_heads, lg.attn,
                             dnormed1, dnormed1);
    dx += detail::layer_norm_bwd<S>(dnormed1, lw.ln1, lt.ln1, lg.ln1);
  }
  dx = detail::dropout_bwd<S>(dx, tape.enc_embed_drop);
  for (size_t t = 0; t < tape.src_ids.size(); ++t) {
    g.tok_embed.row(tape.src_ids[t]) +=
        dx.row(static_cast<Eigen::Index>(t)) * scale;
    g.enc_pos.row(static_cast<Eigen::Index>(t)) +=
        dx.row(static_cast<Eigen::Index>(t));
  }

  if (!freeze_patterns.empty()) {
    visit_params(g, [&](const std::string& name, Mat<S>& m) {
      for (const auto& pattern : freeze_patterns) {
        if (name.find(pattern) != std::string::npos) {
          m.setZero();
          break;
        }
      }
    });
  }
  return g;
}

// ---------------------------------------------------------------------------
// Beam search.

struct DecodeConfig {
  int beam_size = 5;
  double lenpen = 1.0;
  int max_len = 64;
};

inline void validate_config(const DecodeConfig& c) {
  if (c.beam_size < 1) throw config_error("beam_size must be >= 1");
  if (c.lenpen < 0.0) throw config_error("lenpen must be >= 0");
  if (c.max_len < 1) throw config_error("max_len must be >= 1");
}

struct Hypothesis {
  std::vector<int> ids;  // generated tokens, ending with eos (seed excluded)
  double raw_score = 0.0;
  double normalized_score = 0.0;
  bool truncated = false;  // terminated by the max_len rule
};

// Returns the log-probability row over the next token given the prefix
// (prefix[0] is the seed token).
using StepScorer =
    std::function<std::vector<double>(const std::vector<int>& prefix)>;

// Standard beam search: at each step the top beam_size continuations are
// kept; ones ending in eos retire to the finished set and give up their
// slot. Search stops when beam_size hypotheses finished, no live ones
// remain, or max_len tokens were generated (then live hypotheses are
// force-terminated with eos and flagged truncated). Finished hypotheses are
// ranked by raw_score / length^lenpen with deterministic tie-breaking.
inline std::vector<Hypothesis> beam_search(const StepScorer& step,
                                           int vocab_size, int eos_id,
                                           int seed_token,
                                           const DecodeConfig& cfg) {
  validate_config(cfg);
  struct Live {
    std::vector<int> prefix;
    double raw = 0.0;
  };
  std::vector<Live> live = {{{seed_token}, 0.0}};
  std::vector<Hypothesis> finished;

  auto finish = [&](const std::vector<int>& prefix, double raw,
                    bool truncated) {
    Hypothesis h;
    h.ids.assign(prefix.begin() + 1, prefix.end());
    h.ids.push_back(eos_id);
    h.raw_score = raw;
    h.truncated = truncated;
    h.normalized_score =
        raw / std::pow(static_cast<double>(h.ids.size()), cfg.lenpen);
    finished.push_back(std::move(h));
  };

  for (int step_i = 0;
       step_i < cfg.max_len && !live.empty() &&
       finished.size() < static_cast<size_t>(cfg.beam_size);
       ++step_i) {
    struct Cand {
      size_t parent;
      int token;
      double raw;
    };
    std::vector<Cand> cands;
    const bool last = step_i == cfg.max_len - 1;
    for (size_t i = 0; i < live.size(); ++i) {
      const std::vector<double> lp = step(live[i].prefix);
      if (lp.size() != static_cast<size_t>(vocab_size)) {
        throw data_error("step scorer returned " + std::to_string(lp.size()) +
                         " scores for vocab of " + std::to_string(vocab_size));
      }
      if (last) {
        cands.push_back({i, eos_id, live[i].raw + lp[eos_id]});
      } else {
        for (int v = 0; v < vocab_size; ++v) {
          cands.push_back({i, v, live[i].raw + lp[v]});
        }
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.raw != b.raw) return a.raw > b.raw;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });

    std::vector<Live> next_live;
    size_t placed = 0;
    for (const Cand& c : cands) {
      if (placed == static_cast<size_t>(cfg.beam_size)) break;
      if (c.token == eos_id) {
        finish(live[c.parent].prefix, c.raw, last);
      } else {
        Live nl;
        nl.prefix = live[c.parent].prefix;
        nl.prefix.push_back(c.token);
        nl.raw = c.raw;
        next_live.push_back(std::move(nl));
      }
      ++placed;
    }
    live = std::move(next_live);
  }

  std::sort(finished.begin(), finished.end(),
            [](const Hypothesis& a, const Hypothesis& b) {
              if (a.normalized_score != b.normalized_score) {
                return a.normalized_score > b.normalized_score;
              }
              if (a.raw_score != b.raw_score) return a.raw_score > b.raw_score;
              return a.ids < b.ids;
            });
  if (finished.size() > static_cast<size_t>(cfg.beam_size)) {
    finished.resize(static_cast<size_t>(cfg.beam_size));
  }
  return finished;
}

// Model-backed beam search: encodes the source once, then scores each
// prefix with an eval-mode decoder pass.
template <typename S>
std::vector<Hypothesis> beam_search(const Seq2SeqModel<S>& model,
                                    const std::vector<int>& src_ids,
                                    const DecodeConfig& cfg,
                                    int tgt_lang_tag) {
  detail::check_ids<S>(src_ids, model.config, "source");
  if (tgt_lang_tag < 0 || tgt_lang_tag >= model.config.vocab_size) {
    throw config_error("target language tag outside vocab");
  }
  if (cfg.max_len + 1 > model.config.max_positions) {
    throw config_error("max_len " + std::to_string(cfg.max_len) +
                       " plus the seed tag exceeds max_positions " +
                       std::to_string(model.config.max_positions));
  }
  Tape<S> enc_tape;
  Rng rng(0);
  const Mat<S> memory =
      detail::encoder_fwd(model, src_ids, /*train=*/false, rng, enc_tape);

  StepScorer step = [&](const std::vector<int>& prefix) {
    Tape<S> dec_tape;
    Rng dec_rng(0);
    Mat<S> logits = detail::decoder_fwd(model, memory, src_ids, prefix,
                                        /*train=*/false, dec_rng, dec_tape);
    const Eigen::Index t = logits.rows() - 1;
    const S mx = logits.row(t).maxCoeff();
    double lse = 0.0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v) {
      lse += std::exp(static_cast<double>(logits(t, v) - mx));
    }
    lse = std::log(lse) + static_cast<double>(mx);
    std::vector<double> lp(static_cast<size_t>(logits.cols()));
    for (Eigen::Index v = 0; v < logits.cols(); ++v) {
      lp[static_cast<size_t>(v)] = static_cast<double>(logits(t, v)) - lse;
    }
    return lp;
  };
  return beam_search(step, model.config.vocab_size, kEosTokenId, tgt_lang_tag,
                     cfg);
}

}  // namespace mt
