#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hetcur/error.hpp"

namespace hetcur::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Elu, Identity, Softmax };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Elu: return "elu";
    case Activation::Identity: return "identity";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;
};

/// Dense feed-forward network. Also used as the container for gradients and
/// optimizer moments, which share the parameter layout.
struct MlpParams {
  std::vector<Layer> layers;

  [[nodiscard]] Eigen::Index input_size() const { return layers.front().weight.cols(); }
  [[nodiscard]] Eigen::Index output_size() const { return layers.back().weight.rows(); }

  [[nodiscard]] std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  [[nodiscard]] bool same_shape(const MlpParams& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
          layers[i].weight.cols() != other.layers[i].weight.cols() ||
          layers[i].bias.size() != other.layers[i].bias.size()) {
        return false;
      }
    }
    return true;
  }

  [[nodiscard]] MlpParams zeros_like() const {
    MlpParams z;
    for (const auto& l : layers) {
      z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size()),
                          l.activation});
    }
    return z;
  }

  [[nodiscard]] bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  // Flat views in layer order (weights row-major, then bias). Used by the
  // optimizer tests and the finite-difference checks.
  [[nodiscard]] std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(num_params());
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
    }
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != num_params()) throw Error(Errc::ShapeMismatch, "flat parameter vector size");
    std::size_t k = 0;
    for (auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat[k++];
    }
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (a.layers[i].activation != b.layers[i].activation || a.layers[i].weight != b.layers[i].weight ||
          a.layers[i].bias != b.layers[i].bias) {
        return false;
      }
    }
    return true;
  }
};

struct InitOptions {
  double hidden_gain = 1.0;
  double output_gain = 0.01;
  Activation hidden_activation = Activation::Elu;
  Activation output_activation = Activation::Identity;
};

/// Orthogonal matrix of shape rows x cols scaled by `gain`: orthonormal rows
/// when rows <= cols, orthonormal columns otherwise.
inline Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, std::mt19937_64& rng) {
  const bool transpose = rows < cols;
  const Eigen::Index tall = transpose ? cols : rows;
  const Eigen::Index thin = transpose ? rows : cols;
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(tall, thin);
  for (Eigen::Index c = 0; c < thin; ++c)
    for (Eigen::Index r = 0; r < tall; ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(tall, thin);
  const Matrix r = qr.matrixQR().topLeftCorner(thin, thin);
  for (Eigen::Index c = 0; c < thin; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  return gain * (transpose ? Matrix(q.transpose()) : q);
}

/// `layer_sizes` = {input, hidden..., output}. Biases start at zero.
inline MlpParams init_params(std::span<const int> layer_sizes, std::uint64_t seed, const InitOptions& opts = {}) {
  if (layer_sizes.size() < 2) throw Error(Errc::InvalidLayerSizes, "need at least input and output sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw Error(Errc::InvalidLayerSizes, "layer size " + std::to_string(s));
  }
  std::mt19937_64 rng(seed);
  MlpParams p;
  const std::size_t n = layer_sizes.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    Layer l;
    l.weight = orthogonal(layer_sizes[i + 1], layer_sizes[i], last ? opts.output_gain : opts.hidden_gain, rng);
    l.bias = Vector::Zero(layer_sizes[i + 1]);
    l.activation = last ? opts.output_activation : opts.hidden_activation;
    p.layers.push_back(std::move(l));
  }
  return p;
}

inline MlpParams init_params(std::initializer_list<int> layer_sizes, std::uint64_t seed,
                             const InitOptions& opts = {}) {
  return init_params(std::span<const int>(layer_sizes.begin(), layer_sizes.size()), seed, opts);
}

// Column-wise softmax of a (classes x batch) matrix.
inline Matrix softmax_columns(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

inline Matrix log_softmax_columns(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    const double lse = m + std::log((z.col(c).array() - m).exp().sum());
    out.col(c) = (z.col(c).array() - lse).matrix();
  }
  return out;
}

/// Intermediate values of a batched forward pass, kept for backprop.
/// inputs[l] feeds layer l; pre[l] is its pre-activation.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Matrix output;  // activation of the final layer

  [[nodiscard]] const Matrix& final_pre() const { return pre.back(); }
};

inline Matrix apply_activation(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Elu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    case Activation::Identity: return z;
    case Activation::Softmax: return softmax_columns(z);
  }
  return z;
}

/// Batched forward: `x` is (input_size x batch).
inline ForwardCache forward(const MlpParams& params, const Matrix& x) {
  if (params.layers.empty() || x.rows() != params.input_size()) {
    throw Error(Errc::DimensionMismatch, "input has " + std::to_string(x.rows()) + " rows, network expects " +
                                             std::to_string(params.layers.empty() ? 0 : params.input_size()));
  }
  ForwardCache cache;
  cache.inputs.reserve(params.layers.size());
  cache.pre.reserve(params.layers.size());
  Matrix a = x;
  for (const auto& l : params.layers) {
    cache.inputs.push_back(a);
    Matrix z = l.weight * a;
    z.colwise() += l.bias;
    a = apply_activation(l.activation, z);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(a);
  return cache;
}

/// Backpropagates dL/d(final pre-activation) (outputs x batch) through the
/// network. The final layer's own activation is not differentiated: losses
/// are expressed directly on logits / linear outputs.
inline MlpParams backprop(const MlpParams& params, const ForwardCache& cache, const Matrix& d_final_pre) {
  if (d_final_pre.rows() != params.output_size() || d_final_pre.cols() != cache.final_pre().cols()) {
    throw Error(Errc::DimensionMismatch, "output gradient shape");
  }
  MlpParams grads = params.zeros_like();
  Matrix dz = d_final_pre;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    grads.layers[i].weight.noalias() = dz * cache.inputs[i].transpose();
    grads.layers[i].bias = dz.rowwise().sum();
    if (i == 0) break;
    Matrix da = params.layers[i].weight.transpose() * dz;
    const Matrix& zprev = cache.pre[i - 1];
    switch (params.layers[i - 1].activation) {
      case Activation::Elu:
        dz = da.cwiseProduct(zprev.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }));
        break;
      case Activation::Identity: dz = std::move(da); break;
      case Activation::Softmax:
        throw Error(Errc::InvalidLayerSizes, "softmax is only supported on the final layer");
    }
  }
  return grads;
}

// ---- Actor / critic conveniences -------------------------------------------

struct PolicyOutput {
  std::vector<double> probs;
  std::vector<double> logits;
};

struct CriticOutput {
  std::vector<double> q_ext;
  std::vector<double> q_int;
};

inline Matrix column(std::span<const double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

/// obs -> hidden ELU layers -> |A_x| logits -> softmax.
inline MlpParams make_actor(int obs_size, int num_actions, std::span<const int> hidden, std::uint64_t seed) {
  std::vector<int> sizes{obs_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(num_actions);
  InitOptions opts;
  opts.output_activation = Activation::Softmax;
  return init_params(sizes, seed, opts);
}

/// (obs ++ skill one-hot) -> hidden ELU layers -> [Q_ext | Q_int], each |union| wide.
inline MlpParams make_critic(int obs_size, int num_agents, int union_width, std::span<const int> hidden,
                             std::uint64_t seed) {
  std::vector<int> sizes{obs_size + num_agents};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * union_width);
  return init_params(sizes, seed);
}

inline PolicyOutput forward_policy(const MlpParams& params, std::span<const double> obs) {
  const auto cache = forward(params, column(obs));
  PolicyOutput out;
  const Matrix& z = cache.final_pre();
  const Matrix p = softmax_columns(z);
  out.logits.assign(z.data(), z.data() + z.rows());
  out.probs.assign(p.data(), p.data() + p.rows());
  return out;
}

/// Critic input is obs ++ skill one-hot, stacked column-wise for a batch.
inline Matrix critic_input(const Matrix& obs, const Matrix& skill) {
  if (obs.cols() != skill.cols()) throw Error(Errc::DimensionMismatch, "obs / skill batch sizes differ");
  Matrix x(obs.rows() + skill.rows(), obs.cols());
  x << obs, skill;
  return x;
}

inline CriticOutput forward_critic(const MlpParams& params, std::span<const double> obs,
                                   std::span<const double> skill_onehot) {
  if (static_cast<Eigen::Index>(obs.size() + skill_onehot.size()) != params.input_size()) {
    throw Error(Errc::DimensionMismatch, "critic input is obs ++ skill one-hot");
  }
  if (params.output_size() % 2 != 0) throw Error(Errc::DimensionMismatch, "critic needs two equal heads");
  const auto cache = forward(params, critic_input(column(obs), column(skill_onehot)));
  const auto width = static_cast<std::size_t>(params.output_size() / 2);
  const double* q = cache.output.data();
  return {std::vector<double>(q, q + width), std::vector<double>(q + width, q + 2 * width)};
}

}  // namespace hetcur::nn
