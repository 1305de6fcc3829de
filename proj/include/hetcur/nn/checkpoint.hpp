#pragma once

// Parameter checkpoint, structured text:
//
//   hetcur-mlp 1
//   layers <L>
//   layer <i> <out> <in> <activation>
//   <out*in weights, row-major, space separated>
//   <out biases>
//   ... (repeated per layer)
//
// Values are written with 17 significant digits so a save/load round trip is
// exact.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "hetcur/error.hpp"
#include "hetcur/nn/mlp.hpp"

namespace hetcur::nn {

inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& out, const MlpParams& params) {
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  out << "hetcur-mlp " << kCheckpointVersion << '\n';
  out << "layers " << params.layers.size() << '\n';
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    out << "layer " << i << ' ' << l.weight.rows() << ' ' << l.weight.cols() << ' '
        << activation_name(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        if (r != 0 || c != 0) out << ' ';
        put(l.weight(r, c));
      }
    }
    out << '\n';
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      if (r != 0) out << ' ';
      put(l.bias(r));
    }
    out << '\n';
  }
}

inline MlpParams read_checkpoint(std::istream& in) {
  auto fail = [](const std::string& why) { return Error(Errc::BadCheckpoint, why); };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "hetcur-mlp") throw fail("missing header");
  if (version != kCheckpointVersion) throw fail("unsupported version " + std::to_string(version));
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "layers" || n == 0) throw fail("missing layer count");
  MlpParams p;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::string act;
    if (!(in >> tag >> idx >> rows >> cols >> act) || tag != "layer" || idx != i || rows < 1 || cols < 1) {
      throw fail("bad layer header " + std::to_string(i));
    }
    Layer l;
    if (act == "elu") l.activation = Activation::Elu;
    else if (act == "identity") l.activation = Activation::Identity;
    else if (act == "softmax") l.activation = Activation::Softmax;
    else throw fail("unknown activation " + act);
    if (!p.layers.empty() && p.layers.back().weight.rows() != cols) throw fail("layer sizes do not chain");
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> l.weight(r, c))) throw fail("truncated weights");
    for (Eigen::Index r = 0; r < rows; ++r)
      if (!(in >> l.bias(r))) throw fail("truncated biases");
    p.layers.push_back(std::move(l));
  }
  if (!p.all_finite()) throw fail("non-finite parameter");
  return p;
}

inline void save_checkpoint(const std::string& path, const MlpParams& params) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
  write_checkpoint(out, params);
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path);
}

inline MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path);
  return read_checkpoint(in);
}

}  // namespace hetcur::nn
