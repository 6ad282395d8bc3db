#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mt/error.hpp"
#include "mt/model.hpp"
#include "mt/tensor.hpp"

namespace mt {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
};

inline void validate_config(const AdamConfig& c) {
  if (!(c.learning_rate > 0.0)) {
    throw config_error("learning_rate must be > 0");
  }
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) ||
      !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw config_error("adam betas must lie in [0, 1)");
  }
  if (!(c.eps > 0.0)) throw config_error("adam eps must be > 0");
}

template <typename S>
struct AdamState {
  uint64_t step = 0;  // completed updates
  Seq2SeqParams<S> m, v;
};

template <typename S>
AdamState<S> init_adam_state(const Seq2SeqParams<S>& params) {
  AdamState<S> s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

// One ADAM update with bias correction. Tensors whose name contains any
// freeze pattern are skipped entirely: neither the parameter nor its
// moments move. A non-finite gradient aborts before anything is touched.
template <typename S>
void adam_step(Seq2SeqParams<S>& params, const Seq2SeqParams<S>& grads,
               AdamState<S>& state, const AdamConfig& cfg,
               const std::vector<std::string>& freeze_patterns = {}) {
  validate_config(cfg);
  auto named_p = collect_params(params);
  auto named_g = collect_params(const_cast<Seq2SeqParams<S>&>(grads));
  auto named_m = collect_params(state.m);
  auto named_v = collect_params(state.v);
  if (named_g.size() != named_p.size()) {
    throw config_error("gradient structure does not match parameters");
  }

  auto frozen = [&](const std::string& name) {
    for (const auto& pattern : freeze_patterns) {
      if (name.find(pattern) != std::string::npos) return true;
    }
    return false;
  };

  for (size_t i = 0; i < named_p.size(); ++i) {
    const Mat<S>& g = *named_g[i].second;
    if (g.rows() != named_p[i].second->rows() ||
        g.cols() != named_p[i].second->cols()) {
      throw config_error("gradient shape mismatch for " + named_p[i].first);
    }
    if (frozen(named_p[i].first)) continue;
    if (!g.array().isFinite().all()) {
      throw data_error("non-finite gradient in " + named_p[i].first +
                       " at optimizer step " + std::to_string(state.step + 1));
    }
  }

  ++state.step;
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S eps = static_cast<S>(cfg.eps);
  const S bc1 =
      S(1) - static_cast<S>(std::pow(cfg.beta1, double(state.step)));
  const S bc2 =
      S(1) - static_cast<S>(std::pow(cfg.beta2, double(state.step)));
  const S lr = static_cast<S>(cfg.learning_rate);

  for (size_t i = 0; i < named_p.size(); ++i) {
    if (frozen(named_p[i].first)) continue;
    Mat<S>& p = *named_p[i].second;
    const Mat<S>& g = *named_g[i].second;
    Mat<S>& m = *named_m[i].second;
    Mat<S>& v = *named_v[i].second;
    m = b1 * m + (S(1) - b1) * g;
    v = (b2 * v.array() + (S(1) - b2) * g.array().square()).matrix();
    p.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
}

}  // namespace mt
