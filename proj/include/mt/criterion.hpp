#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mt/error.hpp"
#include "mt/tensor.hpp"

namespace mt {

struct SmoothedCeConfig {
  double epsilon = 0.2;  // smoothing mass spread uniformly over the vocab
  int ignore_id = 0;     // target positions with this id carry no loss
};

struct FocalConfig {
  double alpha = 0.5;
  double gamma = 1.0;
  int ignore_id = 0;
};

template <typename S>
struct CriterionResult {
  double loss = 0.0;      // mean over scored target positions
  double loss_sum = 0.0;  // sum over scored target positions
  size_t tokens = 0;      // scored (non-ignored) target count
  Mat<S> grad_logits;     // gradient of the mean loss
};

template <typename S>
Mat<S> log_softmax_rows(const Mat<S>& logits) {
  Mat<S> lp(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S mx = logits.row(i).maxCoeff();
    const S lse =
        std::log((logits.row(i).array() - mx).exp().sum()) + mx;
    lp.row(i) = (logits.row(i).array() - lse).matrix();
  }
  return lp;
}

namespace detail {

template <typename S>
void check_targets(const Mat<S>& logits, const std::vector<int>& targets) {
  if (static_cast<size_t>(logits.rows()) != targets.size()) {
    throw config_error("criterion got " + std::to_string(logits.rows()) +
                       " logit rows for " + std::to_string(targets.size()) +
                       " targets");
  }
  for (int t : targets) {
    if (t < 0 || t >= logits.cols()) {
      throw config_error("target id " + std::to_string(t) +
                         " outside vocab of size " +
                         std::to_string(logits.cols()));
    }
  }
}

}  // namespace detail

// Cross entropy with label smoothing:
//   loss = (1-eps) * (-lp[target]) + eps * mean_v(-lp[v])
//   d loss / d logit_j = p_j - ((1-eps) * [j==target] + eps / V)
template <typename S>
CriterionResult<S> label_smoothed_ce(const Mat<S>& logits,
                                     const std::vector<int>& targets,
                                     const SmoothedCeConfig& cfg = {}) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0)) {
    throw config_error("label smoothing epsilon must lie in [0, 1)");
  }
  detail::check_targets(logits, targets);
  const Eigen::Index vocab = logits.cols();
  const Mat<S> lp = log_softmax_rows(logits);

  CriterionResult<S> r;
  r.grad_logits = Mat<S>::Zero(logits.rows(), vocab);
  const S eps = static_cast<S>(cfg.epsilon);
  const S uniform = eps / static_cast<S>(vocab);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = targets[static_cast<size_t>(i)];
    if (y == cfg.ignore_id) continue;
    ++r.tokens;
    const double nll = -static_cast<double>(lp(i, y));
    const double mean_nll =
        -static_cast<double>(lp.row(i).sum()) / static_cast<double>(vocab);
    r.loss_sum += (1.0 - cfg.epsilon) * nll + cfg.epsilon * mean_nll;
    r.grad_logits.row(i) = lp.row(i).array().exp().matrix();
    r.grad_logits.row(i).array() -= uniform;
    r.grad_logits(i, y) -= S(1) - eps;
  }
  if (r.tokens == 0) {
    throw data_error("all target positions are ignored; nothing to score");
  }
  r.loss = r.loss_sum / static_cast<double>(r.tokens);
  r.grad_logits /= static_cast<S>(r.tokens);
  return r;
}

// Focal loss over the softmax distribution:
//   loss = -alpha * (1 - p_t)^gamma * log(p_t)
//   d loss / d logit_j = alpha * B * (p_j - [j==target])
//   B = u^gamma - gamma * p_t * u^(gamma-1) * log(p_t),  u = 1 - p_t
// gamma == 0 reduces exactly to alpha-scaled cross entropy (B == 1), and
// u == 0 gives B == 0 so a perfectly confident correct prediction has zero
// loss and zero gradient.
template <typename S>
CriterionResult<S> focal_loss(const Mat<S>& logits,
                              const std::vector<int>& targets,
                              const FocalConfig& cfg = {}) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw config_error("focal alpha must lie in (0, 1]");
  }
  if (!(cfg.gamma >= 0.0)) throw config_error("focal gamma must be >= 0");
  detail::check_targets(logits, targets);
  const Mat<S> lp = log_softmax_rows(logits);

  CriterionResult<S> r;
  r.grad_logits = Mat<S>::Zero(logits.rows(), logits.cols());
  const double alpha = cfg.alpha;
  const double gamma = cfg.gamma;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = targets[static_cast<size_t>(i)];
    if (y == cfg.ignore_id) continue;
    ++r.tokens;
    const double lp_t = static_cast<double>(lp(i, y));
    const double p_t = std::exp(lp_t);
    const double u = -std::expm1(lp_t);  // 1 - p_t without cancellation
    double modulation;                   // u^gamma
    double b;
    if (gamma == 0.0) {
      modulation = 1.0;
      b = 1.0;
    } else if (u <= 0.0) {
      modulation = 0.0;
      b = 0.0;
    } else {
      modulation = std::pow(u, gamma);
      b = modulation - gamma * p_t * std::pow(u, gamma - 1.0) * lp_t;
    }
    r.loss_sum += -alpha * modulation * lp_t;
    const S coeff = static_cast<S>(alpha * b);
    r.grad_logits.row(i) = (lp.row(i).array().exp() * coeff).matrix();
    r.grad_logits(i, y) -= coeff;
  }
  if (r.tokens == 0) {
    throw data_error("all target positions are ignored; nothing to score");
  }
  r.loss = r.loss_sum / static_cast<double>(r.tokens);
  r.grad_logits /= static_cast<S>(r.tokens);
  return r;
}

// Central finite differences against an analytic gradient, entry by entry.
// Returns the worst relative mismatch, where the relative scale is floored
// at 1e-3 so near-zero entries compare absolutely.
template <typename S, typename LossFn>
double max_grad_mismatch(Mat<S> logits, LossFn&& loss_of,
                         const Mat<S>& analytic_grad, double step = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const S saved = logits(i, j);
      logits(i, j) = saved + static_cast<S>(step);
      const double up = loss_of(logits);
      logits(i, j) = saved - static_cast<S>(step);
      const double down = loss_of(logits);
      logits(i, j) = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = static_cast<double>(analytic_grad(i, j));
      const double scale =
          std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, std::abs(fd - an) / scale);
    }
  }
  return worst;
}

}  // namespace mt
