#pragma once

// On-policy optimisation: per-stream GAE, advantage mixing, the clipped
// surrogate objective and the skill-conditioned Q critic whose state values
// are recovered as V_x(s) = sum_{a in A_x} pi_x(a|s) Q(s, a).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "hetcur/env_grid.hpp"
#include "hetcur/error.hpp"
#include "hetcur/nn/adam.hpp"
#include "hetcur/nn/losses.hpp"
#include "hetcur/nn/mlp.hpp"
#include "hetcur/skills.hpp"

namespace hetcur::ppo {

struct PpoConfig {
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  int epochs = 4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double lr = 1e-4;
  int rollout_length = 50;
  /// Zero-mean / unit-std each advantage stream per rollout before mixing.
  bool normalize_advantages = false;
  /// Zero-mean / unit-std the mixed advantage after mixing.
  bool normalize_mixed = false;
  /// Done flags cut the intrinsic stream too. Off = intrinsic bootstraps across episodes.
  bool intrinsic_episodic = true;
  /// Global-norm gradient clipping; <= 0 disables it.
  double max_grad_norm = 0.0;
  std::vector<int> hidden = {64, 64};
};

inline void validate(const PpoConfig& c) {
  if (!(c.clip_eps > 0.0 && c.clip_eps < 1.0)) throw Error(Errc::InconsistentConfig, "clip_eps must be in (0,1)");
  if (c.epochs < 1) throw Error(Errc::InconsistentConfig, "epochs must be >= 1");
  if (c.rollout_length < 1) throw Error(Errc::InconsistentConfig, "rollout_length must be >= 1");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw Error(Errc::InconsistentConfig, "gamma must be in (0,1]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) throw Error(Errc::InconsistentConfig, "gae_lambda must be in [0,1]");
  if (!(c.lr > 0.0)) throw Error(Errc::InconsistentConfig, "lr must be > 0");
  for (int h : c.hidden) {
    if (h < 1) throw Error(Errc::InconsistentConfig, "hidden sizes must be >= 1");
  }
}

/// Fixed-length on-policy segment collected by one runner. Episodes may end
/// and restart inside it.
struct Rollout {
  int agent_id = 0;
  std::vector<double> skill_onehot;
  std::vector<std::vector<double>> observations;
  std::vector<Action> actions;
  std::vector<double> log_prob_old;
  std::vector<double> reward_ext;
  std::vector<double> reward_int;
  std::vector<std::vector<double>> q_ext_rows;
  std::vector<std::vector<double>> q_int_rows;
  std::vector<std::vector<double>> policy_probs;
  std::vector<std::uint8_t> dones;
  std::vector<Cell> bins;  // agent cell at s_t
  // Snapshot evaluation at s_T for bootstrapping.
  std::vector<double> next_q_ext;
  std::vector<double> next_q_int;
  std::vector<double> next_probs;

  [[nodiscard]] std::size_t size() const { return actions.size(); }
};

struct AdvantageBundle {
  std::vector<double> adv_ext;
  std::vector<double> adv_int;
  std::vector<double> adv_total;
  std::vector<double> v_targets_ext;
  std::vector<double> v_targets_int;
  /// |adv_ext| >= |beta * adv_int| per step, on the streams that were mixed.
  std::vector<std::uint8_t> ext_dominant;
};

/// V_x(s) = sum over the agent's own actions of pi_x(a|s) * Q(s,a). Entries of
/// `q_row` for actions outside the profile never contribute.
inline double value_from_q(std::span<const double> policy_probs, std::span<const double> q_row,
                           const SkillProfile& profile, const ActionUniverse& universe) {
  if (policy_probs.size() != profile.size()) {
    throw Error(Errc::IndexMismatch, "policy has " + std::to_string(policy_probs.size()) + " entries, profile " +
                                         std::to_string(profile.size()));
  }
  if (q_row.size() != universe.size()) throw Error(Errc::IndexMismatch, "q row width differs from the union");
  double v = 0.0;
  for (std::size_t k = 0; k < profile.actions.size(); ++k) {
    const auto u = universe.index_of(profile.actions[k]);
    if (!u) throw Error(Errc::IndexMismatch, "profile action missing from the union");
    v += policy_probs[k] * q_row[*u];
  }
  return v;
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> v_targets;
};

/// A_t = sum_l (gamma lambda)^l delta_{t+l}, delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t).
/// `values` holds T+1 entries; the last is the bootstrap value.
inline GaeResult gae(std::span<const double> rewards, std::span<const double> values,
                     std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T) {
    throw Error(Errc::LengthMismatch, "gae needs T rewards, T+1 values and T done flags");
  }
  GaeResult r{std::vector<double>(T), std::vector<double>(T)};
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    running = delta + gamma * lambda * live * running;
    r.advantages[t] = running;
    r.v_targets[t] = running + values[t];
  }
  return r;
}

/// (x - mean) / (std + 1e-8), population std.
inline std::vector<double> standardize(std::span<const double> x) {
  if (x.empty()) return {};
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / (sd + 1e-8);
  return out;
}

/// adv_ext + beta * adv_int. With `normalize`, each stream is standardized first.
/// beta == 0 returns the (possibly standardized) extrinsic stream unchanged.
inline std::vector<double> mix_advantages(std::span<const double> adv_ext, std::span<const double> adv_int,
                                          double beta, bool normalize = false) {
  if (adv_ext.size() != adv_int.size()) throw Error(Errc::LengthMismatch, "advantage streams differ in length");
  std::vector<double> ext = normalize ? standardize(adv_ext) : std::vector<double>(adv_ext.begin(), adv_ext.end());
  if (beta == 0.0) return ext;
  const std::vector<double> in = normalize ? standardize(adv_int) : std::vector<double>(adv_int.begin(), adv_int.end());
  for (std::size_t i = 0; i < ext.size(); ++i) ext[i] += beta * in[i];
  return ext;
}

/// Per-stream GAE over a rollout using Q-derived state values, followed by
/// optional stream standardization and mixing.
inline AdvantageBundle compute_advantages(const Rollout& ro, const SkillProfile& profile,
                                          const ActionUniverse& universe, const PpoConfig& cfg, double beta) {
  const std::size_t T = ro.size();
  if (ro.reward_ext.size() != T || ro.reward_int.size() != T || ro.q_ext_rows.size() != T ||
      ro.q_int_rows.size() != T || ro.policy_probs.size() != T || ro.dones.size() != T) {
    throw Error(Errc::LengthMismatch, "rollout arrays are not aligned");
  }
  std::vector<double> v_ext(T + 1);
  std::vector<double> v_int(T + 1);
  for (std::size_t t = 0; t < T; ++t) {
    v_ext[t] = value_from_q(ro.policy_probs[t], ro.q_ext_rows[t], profile, universe);
    v_int[t] = value_from_q(ro.policy_probs[t], ro.q_int_rows[t], profile, universe);
  }
  v_ext[T] = value_from_q(ro.next_probs, ro.next_q_ext, profile, universe);
  v_int[T] = value_from_q(ro.next_probs, ro.next_q_int, profile, universe);

  const GaeResult ext = gae(ro.reward_ext, v_ext, ro.dones, cfg.gamma, cfg.gae_lambda);
  const std::vector<std::uint8_t> no_dones(T, 0);
  const GaeResult in = gae(ro.reward_int, v_int, cfg.intrinsic_episodic ? std::span<const std::uint8_t>(ro.dones)
                                                                        : std::span<const std::uint8_t>(no_dones),
                           cfg.gamma, cfg.gae_lambda);

  AdvantageBundle b;
  b.adv_ext = ext.advantages;
  b.adv_int = in.advantages;
  b.v_targets_ext = ext.v_targets;
  b.v_targets_int = in.v_targets;
  const std::vector<double> e = cfg.normalize_advantages ? standardize(b.adv_ext) : b.adv_ext;
  const std::vector<double> i = cfg.normalize_advantages ? standardize(b.adv_int) : b.adv_int;
  b.adv_total = mix_advantages(e, i, beta, false);
  if (cfg.normalize_mixed) b.adv_total = standardize(b.adv_total);
  b.ext_dominant.resize(T);
  for (std::size_t t = 0; t < T; ++t) b.ext_dominant[t] = std::abs(e[t]) >= std::abs(beta * i[t]) ? 1 : 0;
  return b;
}

/// -mean(min(r A, clip(r) A)) - entropy_coef * mean(entropy), r = exp(new - old).
inline double ppo_policy_loss(std::span<const double> log_prob_new, std::span<const double> log_prob_old,
                              std::span<const double> adv_total, double clip_eps, std::span<const double> entropy,
                              double entropy_coef) {
  const std::size_t n = log_prob_new.size();
  if (log_prob_old.size() != n || adv_total.size() != n || entropy.size() != n || n == 0) {
    throw Error(Errc::LengthMismatch, "policy loss inputs must be non-empty and aligned");
  }
  double surrogate = 0.0;
  double ent = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = std::exp(log_prob_new[i] - log_prob_old[i]);
    surrogate += std::min(ratio * adv_total[i], std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv_total[i]);
    ent += entropy[i];
  }
  const double loss = -surrogate / static_cast<double>(n) - entropy_coef * ent / static_cast<double>(n);
  if (!std::isfinite(loss)) throw Error(Errc::NonFinite, "policy loss is not finite");
  return loss;
}

/// MSE of Q_ext(s, a_taken) and Q_int(s, a_taken) against their targets.
inline double critic_loss(std::span<const std::vector<double>> q_ext_rows, std::span<const std::vector<double>> q_int_rows,
                          std::span<const int> actions_taken, std::span<const double> v_targets_ext,
                          std::span<const double> v_targets_int) {
  const std::size_t n = actions_taken.size();
  if (q_ext_rows.size() != n || q_int_rows.size() != n || v_targets_ext.size() != n || v_targets_int.size() != n ||
      n == 0) {
    throw Error(Errc::LengthMismatch, "critic loss inputs must be non-empty and aligned");
  }
  double ext = 0.0;
  double in = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(actions_taken[i]);
    const double de = q_ext_rows[i].at(a) - v_targets_ext[i];
    const double di = q_int_rows[i].at(a) - v_targets_int[i];
    ext += de * de;
    in += di * di;
  }
  return (ext + in) / static_cast<double>(n);
}

struct TrainDiagnostics {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double adv_ext_abs = 0.0;
  double adv_int_abs = 0.0;
  double policy_loss = 0.0;
  std::vector<double> critic_loss_per_epoch;
  AdvantageBundle advantages;
};

/// Learnable state of one network plus its optimizer.
struct Learner {
  nn::MlpParams params;
  nn::OptimState optim;
};

inline nn::Matrix observation_matrix(const std::vector<std::vector<double>>& obs) {
  const auto rows = static_cast<Eigen::Index>(obs.front().size());
  nn::Matrix m(rows, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t c = 0; c < obs.size(); ++c) {
    if (static_cast<Eigen::Index>(obs[c].size()) != rows) throw Error(Errc::DimensionMismatch, "ragged observations");
    for (Eigen::Index r = 0; r < rows; ++r) m(r, static_cast<Eigen::Index>(c)) = obs[c][static_cast<std::size_t>(r)];
  }
  return m;
}

/// Full-batch PPO update: `cfg.epochs` passes over the rollout, each taking
/// one actor step on the clipped surrogate (+ entropy bonus) and one critic
/// step on the two-head MSE with the collector's skill one-hot.
inline TrainDiagnostics train_on_rollout(const Rollout& ro, Learner& actor, Learner& critic, const SkillProfile& profile,
                                         const ActionUniverse& universe, const PpoConfig& cfg, double beta) {
  const std::size_t T = ro.size();
  if (T == 0) throw Error(Errc::LengthMismatch, "empty rollout");
  if (ro.observations.size() != T || ro.log_prob_old.size() != T) {
    throw Error(Errc::LengthMismatch, "rollout arrays are not aligned");
  }
  TrainDiagnostics d;
  d.advantages = compute_advantages(ro, profile, universe, cfg, beta);
  for (std::size_t t = 0; t < T; ++t) {
    d.adv_ext_abs += std::abs(d.advantages.adv_ext[t]) / static_cast<double>(T);
    d.adv_int_abs += std::abs(d.advantages.adv_int[t]) / static_cast<double>(T);
  }

  const nn::Matrix obs = observation_matrix(ro.observations);
  nn::Matrix skill(static_cast<Eigen::Index>(ro.skill_onehot.size()), static_cast<Eigen::Index>(T));
  for (Eigen::Index c = 0; c < skill.cols(); ++c)
    for (Eigen::Index r = 0; r < skill.rows(); ++r) skill(r, c) = ro.skill_onehot[static_cast<std::size_t>(r)];
  const nn::Matrix critic_x = nn::critic_input(obs, skill);

  nn::PolicyLoss policy_spec;
  policy_spec.entropy_coef = cfg.entropy_coef;
  policy_spec.surrogate.clip_eps = cfg.clip_eps;
  policy_spec.surrogate.log_prob_old = ro.log_prob_old;
  policy_spec.surrogate.advantages = d.advantages.adv_total;
  nn::CriticMseLoss critic_spec;
  critic_spec.targets_ext = d.advantages.v_targets_ext;
  critic_spec.targets_int = d.advantages.v_targets_int;
  for (Action a : ro.actions) {
    const auto local = profile.local_index(a);
    const auto u = universe.index_of(a);
    if (!local || !u) throw Error(Errc::IndexMismatch, "rollout action outside the collector's profile");
    policy_spec.surrogate.actions.push_back(static_cast<int>(*local));
    critic_spec.actions.push_back(static_cast<int>(*u));
  }

  const double inv_epochs = 1.0 / static_cast<double>(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto pr = nn::backward(actor.params, policy_spec, obs);
    const nn::Matrix logp = nn::log_softmax_columns(pr.cache.final_pre());
    for (std::size_t t = 0; t < T; ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      const double ratio = std::exp(logp(policy_spec.surrogate.actions[t], i) - ro.log_prob_old[t]);
      d.mean_ratio += ratio * inv_epochs / static_cast<double>(T);
      if (std::abs(ratio - 1.0) > cfg.clip_eps) d.clip_fraction += inv_epochs / static_cast<double>(T);
      double h = 0.0;
      for (Eigen::Index j = 0; j < logp.rows(); ++j) h -= std::exp(logp(j, i)) * logp(j, i);
      d.entropy += h * inv_epochs / static_cast<double>(T);
    }
    d.policy_loss += pr.loss * inv_epochs;
    if (cfg.max_grad_norm > 0.0) nn::clip_global_norm(pr.grads, cfg.max_grad_norm);
    nn::optimizer_step(actor.params, pr.grads, actor.optim);

    auto cr = nn::backward(critic.params, critic_spec, critic_x);
    d.critic_loss_per_epoch.push_back(cr.loss);
    if (cfg.max_grad_norm > 0.0) nn::clip_global_norm(cr.grads, cfg.max_grad_norm);
    nn::optimizer_step(critic.params, cr.grads, critic.optim);
  }
  return d;
}

}  // namespace hetcur::ppo
