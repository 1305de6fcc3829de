#pragma once

// Scalar losses evaluated on network outputs, each returning the loss value
// and its exact gradient with respect to the final pre-activation (policy
// logits or linear critic outputs).

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "hetcur/error.hpp"
#include "hetcur/nn/mlp.hpp"

namespace hetcur::nn {

/// -mean(min(r A, clip(r, 1-eps, 1+eps) A)), r = exp(log pi(a|s) - log pi_old(a|s)).
struct ClippedSurrogateLoss {
  std::vector<int> actions;  // indices into the policy output
  std::vector<double> log_prob_old;
  std::vector<double> advantages;
  double clip_eps = 0.2;
};

/// -coef * mean(H(pi(.|s))).
struct EntropyBonusLoss {
  double coef = 0.01;
};

/// Clipped surrogate plus entropy bonus: the full actor objective.
struct PolicyLoss {
  ClippedSurrogateLoss surrogate;
  double entropy_coef = 0.01;
};

/// mean((Q_ext(s,a) - t_ext)^2) + mean((Q_int(s,a) - t_int)^2) on the taken
/// action only. Outputs are laid out [Q_ext | Q_int].
struct CriticMseLoss {
  std::vector<int> actions;  // indices into the union action ordering
  std::vector<double> targets_ext;
  std::vector<double> targets_int;
};

using LossSpec = std::variant<ClippedSurrogateLoss, EntropyBonusLoss, PolicyLoss, CriticMseLoss>;

struct OutputLoss {
  double value = 0.0;
  Matrix grad;  // dL / d(final pre-activation)
};

inline OutputLoss evaluate(const ClippedSurrogateLoss& spec, const Matrix& logits) {
  const Eigen::Index batch = logits.cols();
  if (batch == 0) throw Error(Errc::DimensionMismatch, "empty minibatch");
  if (static_cast<Eigen::Index>(spec.actions.size()) != batch ||
      static_cast<Eigen::Index>(spec.log_prob_old.size()) != batch ||
      static_cast<Eigen::Index>(spec.advantages.size()) != batch) {
    throw Error(Errc::DimensionMismatch, "surrogate loss arrays must match the batch");
  }
  const Matrix logp = log_softmax_columns(logits);
  OutputLoss out{0.0, Matrix::Zero(logits.rows(), batch)};
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto a = static_cast<Eigen::Index>(spec.actions[static_cast<std::size_t>(i)]);
    if (a < 0 || a >= logits.rows()) throw Error(Errc::DimensionMismatch, "action index out of range");
    const double adv = spec.advantages[static_cast<std::size_t>(i)];
    const double ratio = std::exp(logp(a, i) - spec.log_prob_old[static_cast<std::size_t>(i)]);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - spec.clip_eps, 1.0 + spec.clip_eps) * adv;
    out.value -= std::min(unclipped, clipped) * inv_b;
    if (unclipped <= clipped) {
      // d ratio / d z_j = ratio * (1[j == a] - p_j)
      for (Eigen::Index j = 0; j < logits.rows(); ++j) {
        const double p = std::exp(logp(j, i));
        out.grad(j, i) = -inv_b * adv * ratio * ((j == a ? 1.0 : 0.0) - p);
      }
    }
  }
  return out;
}

inline OutputLoss evaluate(const EntropyBonusLoss& spec, const Matrix& logits) {
  const Eigen::Index batch = logits.cols();
  if (batch == 0) throw Error(Errc::DimensionMismatch, "empty minibatch");
  const Matrix logp = log_softmax_columns(logits);
  OutputLoss out{0.0, Matrix::Zero(logits.rows(), batch)};
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < logits.rows(); ++j) h -= std::exp(logp(j, i)) * logp(j, i);
    out.value -= spec.coef * h * inv_b;
    // dH/dz_j = -p_j (log p_j + H)
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
      out.grad(j, i) = spec.coef * inv_b * std::exp(logp(j, i)) * (logp(j, i) + h);
    }
  }
  return out;
}

inline OutputLoss evaluate(const PolicyLoss& spec, const Matrix& logits) {
  OutputLoss s = evaluate(spec.surrogate, logits);
  const OutputLoss e = evaluate(EntropyBonusLoss{spec.entropy_coef}, logits);
  s.value += e.value;
  s.grad += e.grad;
  return s;
}

inline OutputLoss evaluate(const CriticMseLoss& spec, const Matrix& q) {
  const Eigen::Index batch = q.cols();
  if (batch == 0) throw Error(Errc::DimensionMismatch, "empty minibatch");
  if (q.rows() % 2 != 0) throw Error(Errc::DimensionMismatch, "critic needs two equal heads");
  if (static_cast<Eigen::Index>(spec.actions.size()) != batch ||
      static_cast<Eigen::Index>(spec.targets_ext.size()) != batch ||
      static_cast<Eigen::Index>(spec.targets_int.size()) != batch) {
    throw Error(Errc::DimensionMismatch, "critic loss arrays must match the batch");
  }
  const Eigen::Index width = q.rows() / 2;
  OutputLoss out{0.0, Matrix::Zero(q.rows(), batch)};
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto a = static_cast<Eigen::Index>(spec.actions[k]);
    if (a < 0 || a >= width) throw Error(Errc::DimensionMismatch, "action index out of range");
    const double e_ext = q(a, i) - spec.targets_ext[k];
    const double e_int = q(width + a, i) - spec.targets_int[k];
    out.value += (e_ext * e_ext + e_int * e_int) * inv_b;
    out.grad(a, i) = 2.0 * e_ext * inv_b;
    out.grad(width + a, i) = 2.0 * e_int * inv_b;
  }
  return out;
}

struct BackwardResult {
  double loss = 0.0;
  MlpParams grads;
  ForwardCache cache;
};

/// Forward pass on `minibatch` (input_size x batch), loss evaluation, and
/// exact gradients of the loss with respect to every parameter.
inline BackwardResult backward(const MlpParams& params, const LossSpec& loss, const Matrix& minibatch) {
  BackwardResult r;
  r.cache = forward(params, minibatch);
  const OutputLoss out = std::visit([&](const auto& spec) { return evaluate(spec, r.cache.final_pre()); }, loss);
  if (!std::isfinite(out.value) || !out.grad.allFinite()) {
    throw Error(Errc::NonFiniteLoss, "loss or its output gradient is not finite");
  }
  r.loss = out.value;
  r.grads = backprop(params, r.cache, out.grad);
  return r;
}

/// Loss value only (no gradient); used by finite-difference checks.
inline double loss_value(const MlpParams& params, const LossSpec& loss, const Matrix& minibatch) {
  const auto cache = forward(params, minibatch);
  return std::visit([&](const auto& spec) { return evaluate(spec, cache.final_pre()).value; }, loss);
}

}  // namespace hetcur::nn
