#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "hetcur/nn/adam.hpp"
#include "hetcur/nn/checkpoint.hpp"
#include "hetcur/nn/losses.hpp"
#include "hetcur/nn/mlp.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hetcur;
using namespace hetcur::nn;

namespace {

MlpParams zero_like_actor(int obs, int actions) {
  const int hidden[] = {8, 8};
  return make_actor(obs, actions, hidden, 1).zeros_like();
}

}  // namespace

TEST(Init, DeterministicForSeed) {
  EXPECT_EQ(init_params({10, 64, 64, 5}, 0), init_params({10, 64, 64, 5}, 0));
  EXPECT_FALSE(init_params({10, 64, 64, 5}, 0) == init_params({10, 64, 64, 5}, 1));
}

TEST(Init, OrthogonalRowsAndZeroBiases) {
  const auto p = init_params({80, 64, 64, 5}, 3);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& w = p.layers[i].weight;
    const double gain = i + 1 == p.layers.size() ? 0.01 : 1.0;
    ASSERT_LE(w.rows(), w.cols());
    const Matrix wwt = w * w.transpose() / (gain * gain);
    EXPECT_LT((wwt - Matrix::Identity(w.rows(), w.rows())).cwiseAbs().maxCoeff(), 1e-6) << "layer " << i;
    EXPECT_EQ(p.layers[i].bias.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Init, OrthogonalColumnsWhenTall) {
  const auto p = init_params({4, 32, 2}, 9);
  const auto& w = p.layers[0].weight;
  const Matrix wtw = w.transpose() * w;
  EXPECT_LT((wtw - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Init, InvalidSizes) {
  EXPECT_ERRC(init_params({5}, 0), Errc::InvalidLayerSizes);
  EXPECT_ERRC(init_params({5, 0, 3}, 0), Errc::InvalidLayerSizes);
  EXPECT_ERRC(init_params({-1, 3}, 0), Errc::InvalidLayerSizes);
}

TEST(Init, ParameterCountAndFlattenRoundTrip) {
  auto p = init_params({3, 4, 2}, 5);
  EXPECT_EQ(p.num_params(), 3u * 4 + 4 + 4 * 2 + 2);
  const auto flat = p.flatten();
  auto q = p.zeros_like();
  q.unflatten(flat);
  EXPECT_EQ(p, q);
  EXPECT_ERRC(q.unflatten(std::vector<double>(3)), Errc::ShapeMismatch);
}

TEST(Policy, ZeroWeightsGiveUniform) {
  const auto p = zero_like_actor(7, 5);
  const std::vector<double> obs(7, 1.0);
  const auto out = forward_policy(p, obs);
  ASSERT_EQ(out.probs.size(), 5u);
  for (double v : out.probs) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Policy, ShiftInvariant) {
  const int hidden[] = {16, 16};
  auto p = make_actor(6, 4, hidden, 11);
  std::mt19937_64 rng(2);
  const auto obs_m = oracle::random_matrix(6, 1, rng);
  const std::vector<double> obs(obs_m.data(), obs_m.data() + 6);
  const auto a = forward_policy(p, obs);
  p.layers.back().bias.array() += 3.7;
  const auto b = forward_policy(p, obs);
  for (std::size_t i = 0; i < a.probs.size(); ++i) {
    EXPECT_NEAR(a.probs[i], b.probs[i], 1e-12);
    EXPECT_NEAR(b.logits[i] - a.logits[i], 3.7, 1e-12);
  }
}

TEST(Policy, ProbabilitiesNormalizedAndPositive) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int hidden[] = {64, 64};
    auto p = make_actor(12, 5, hidden, rng());
    for (auto& l : p.layers) l.weight *= 20.0;
    const auto obs_m = oracle::random_matrix(12, 1, rng, 3.0);
    const auto out = forward_policy(p, std::vector<double>(obs_m.data(), obs_m.data() + 12));
    double s = 0.0;
    for (double v : out.probs) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Policy, DimensionMismatch) {
  const int hidden[] = {4};
  const auto p = make_actor(6, 4, hidden, 1);
  EXPECT_ERRC(forward_policy(p, std::vector<double>(5)), Errc::DimensionMismatch);
}

TEST(Critic, HeadsHaveUnionWidth) {
  const int hidden[] = {64, 64};
  const auto c = make_critic(61, 2, 5, hidden, 3);
  const auto out = forward_critic(c, std::vector<double>(61, 0.0), std::vector<double>{1.0, 0.0});
  EXPECT_EQ(out.q_ext.size(), 5u);
  EXPECT_EQ(out.q_int.size(), 5u);
}

TEST(Critic, SkillChangesOutput) {
  const int hidden[] = {32, 32};
  auto c = make_critic(10, 2, 5, hidden, 3);
  for (auto& l : c.layers) l.weight *= 50.0;
  std::vector<double> obs(10, 0.0);
  obs[2] = obs[7] = 1.0;
  const auto a = forward_critic(c, obs, std::vector<double>{1.0, 0.0});
  const auto b = forward_critic(c, obs, std::vector<double>{0.0, 1.0});
  EXPECT_NE(a.q_ext, b.q_ext);
  EXPECT_NE(a.q_int, b.q_int);
}

TEST(Critic, ZeroNetworkGivesZeros) {
  const int hidden[] = {8};
  const auto c = make_critic(4, 2, 5, hidden, 3).zeros_like();
  const auto out = forward_critic(c, std::vector<double>(4, 1.0), std::vector<double>{0.0, 1.0});
  for (double v : out.q_ext) EXPECT_EQ(v, 0.0);
  for (double v : out.q_int) EXPECT_EQ(v, 0.0);
}

TEST(Critic, DimensionMismatch) {
  const int hidden[] = {8};
  const auto c = make_critic(4, 2, 5, hidden, 3);
  EXPECT_ERRC(forward_critic(c, std::vector<double>(4), std::vector<double>(3)), Errc::DimensionMismatch);
}

class GradientCheck : public ::testing::TestWithParam<oracle::LossKind> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  std::mt19937_64 rng(100 + static_cast<int>(GetParam()));
  for (int draw = 0; draw < 5; ++draw) {
    const auto inst = oracle::random_instance(GetParam(), rng, 24);
    const auto r = oracle::check_gradient(inst.params, inst.loss, inst.x);
    EXPECT_LT(r.max_rel_error, 1e-4) << "draw " << draw;
    EXPECT_EQ(r.checked, inst.params.num_params());
  }
}

INSTANTIATE_TEST_SUITE_P(Losses, GradientCheck,
                         ::testing::Values(oracle::LossKind::Surrogate, oracle::LossKind::Entropy,
                                           oracle::LossKind::Policy, oracle::LossKind::Critic));

TEST(Backward, ZeroAdvantageGivesZeroSurrogateGradient) {
  std::mt19937_64 rng(8);
  auto inst = oracle::random_instance(oracle::LossKind::Surrogate, rng, 16);
  auto s = std::get<ClippedSurrogateLoss>(inst.loss);
  std::fill(s.advantages.begin(), s.advantages.end(), 0.0);
  const auto r = backward(inst.params, s, inst.x);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grads.flatten()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, MseAtTargetsIsZero) {
  std::mt19937_64 rng(9);
  auto inst = oracle::random_instance(oracle::LossKind::Critic, rng, 16);
  auto c = std::get<CriticMseLoss>(inst.loss);
  const Matrix q = forward(inst.params, inst.x).final_pre();
  const auto width = q.rows() / 2;
  for (std::size_t i = 0; i < c.actions.size(); ++i) {
    c.targets_ext[i] = q(c.actions[i], static_cast<Eigen::Index>(i));
    c.targets_int[i] = q(width + c.actions[i], static_cast<Eigen::Index>(i));
  }
  const auto r = backward(inst.params, c, inst.x);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grads.flatten()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, ClippedSamplesCarryNoSurrogateGradient) {
  // One sample, ratio far above 1 + eps with positive advantage: the clipped branch is active.
  const auto p = init_params({3, 4, 3}, 2, {1.0, 1.0});
  Matrix x = Matrix::Ones(3, 1);
  const Matrix logp = log_softmax_columns(forward(p, x).final_pre());
  ClippedSurrogateLoss s{{1}, {logp(1, 0) - 1.0}, {1.0}, 0.2};
  const auto r = backward(p, s, x);
  EXPECT_NEAR(r.loss, -1.2, 1e-12);
  for (double g : r.grads.flatten()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, NonFiniteLoss) {
  std::mt19937_64 rng(10);
  auto inst = oracle::random_instance(oracle::LossKind::Surrogate, rng, 8);
  auto s = std::get<ClippedSurrogateLoss>(inst.loss);
  s.advantages[0] = std::nan("");
  EXPECT_ERRC(backward(inst.params, s, inst.x), Errc::NonFiniteLoss);
}

TEST(Backward, Deterministic) {
  std::mt19937_64 rng(12);
  const auto inst = oracle::random_instance(oracle::LossKind::Policy, rng, 32);
  EXPECT_EQ(backward(inst.params, inst.loss, inst.x).grads, backward(inst.params, inst.loss, inst.x).grads);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  auto p = init_params({4, 6, 3}, 1);
  const auto before = p;
  auto st = make_optimizer(p);
  optimizer_step(p, p.zeros_like(), st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step_count, 1);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  // With a constant gradient g, m_hat = g and v_hat = g^2 exactly after bias
  // correction, so every step moves each parameter by lr * |g| / (|g| + eps).
  auto p = init_params({2, 3}, 1);
  auto g = p.zeros_like();
  for (auto& l : g.layers) {
    l.weight.setConstant(0.37);
    l.bias.setConstant(-2.5);
  }
  auto st = make_optimizer(p, 1e-3);
  for (int k = 0; k < 200; ++k) {
    const auto before = p.flatten();
    optimizer_step(p, g, st);
    const auto after = p.flatten();
    const auto gf = g.flatten();
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double expected = 1e-3 * std::abs(gf[i]) / (std::abs(gf[i]) + 1e-8);
      EXPECT_NEAR(std::abs(after[i] - before[i]), expected, 1e-12);
    }
  }
}

TEST(Adam, MatchesScalarReference) {
  auto p = init_params({1, 1}, 1);
  p.layers[0].weight(0, 0) = 0.5;
  p.layers[0].bias(0) = 0.0;
  auto st = make_optimizer(p, 0.1);
  double theta = 0.5;
  double m = 0.0;
  double v = 0.0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int t = 1; t <= 20; ++t) {
    auto g = p.zeros_like();
    const double gv = n(rng);
    g.layers[0].weight(0, 0) = gv;
    optimizer_step(p, g, st);
    m = 0.9 * m + 0.1 * gv;
    v = 0.999 * v + 0.001 * gv * gv;
    theta -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.layers[0].weight(0, 0), theta, 1e-14);
  }
}

TEST(Adam, ShapeMismatch) {
  auto p = init_params({4, 6, 3}, 1);
  auto st = make_optimizer(p);
  EXPECT_ERRC(optimizer_step(p, init_params({4, 5, 3}, 1), st), Errc::ShapeMismatch);
}

TEST(Adam, Deterministic) {
  std::mt19937_64 rng(5);
  const auto inst = oracle::random_instance(oracle::LossKind::Critic, rng, 16);
  auto run = [&] {
    auto p = inst.params;
    auto st = make_optimizer(p);
    for (int k = 0; k < 10; ++k) optimizer_step(p, backward(p, inst.loss, inst.x).grads, st);
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, GlobalNormClipping) {
  auto g = init_params({2, 2}, 1).zeros_like();
  g.layers[0].weight << 3.0, 0.0, 0.0, 0.0;
  g.layers[0].bias << 4.0, 0.0;
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  EXPECT_NEAR(g.layers[0].weight(0, 0), 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 0.0), global_norm(g));
}

TEST(Checkpoint, RoundTripIsExact) {
  const int hidden[] = {64, 64};
  const auto p = make_actor(20, 5, hidden, 17);
  std::stringstream ss;
  write_checkpoint(ss, p);
  EXPECT_EQ(read_checkpoint(ss), p);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto p = init_params({3, 4, 2}, 2);
  const auto path = ::testing::TempDir() + "/ckpt.txt";
  save_checkpoint(path, p);
  EXPECT_EQ(load_checkpoint(path), p);
}

TEST(Checkpoint, RejectsMalformedInput) {
  std::stringstream bad_header("hello 1\n");
  EXPECT_ERRC(read_checkpoint(bad_header), Errc::BadCheckpoint);
  std::stringstream bad_version("hetcur-mlp 9\nlayers 1\n");
  EXPECT_ERRC(read_checkpoint(bad_version), Errc::BadCheckpoint);
  std::stringstream truncated("hetcur-mlp 1\nlayers 1\nlayer 0 2 2 identity\n1 2 3\n");
  EXPECT_ERRC(read_checkpoint(truncated), Errc::BadCheckpoint);
  std::stringstream nonchain(
      "hetcur-mlp 1\nlayers 2\nlayer 0 2 2 elu\n1 2 3 4\n0 0\nlayer 1 1 3 identity\n1 1 1\n0\n");
  EXPECT_ERRC(read_checkpoint(nonchain), Errc::BadCheckpoint);
  std::stringstream act("hetcur-mlp 1\nlayers 1\nlayer 0 1 1 tanh\n1\n0\n");
  EXPECT_ERRC(read_checkpoint(act), Errc::BadCheckpoint);
  EXPECT_ERRC(load_checkpoint("/nonexistent/ckpt"), Errc::IoFailure);
}
