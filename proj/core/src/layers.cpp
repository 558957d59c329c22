#include "imed/layers.hpp"

#include <cmath>

namespace imed {

Affine::Affine(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng, double gain)
    : weight(name + ".W", randn(in, out, rng, gain / std::sqrt(static_cast<double>(in)))),
      bias(name + ".b", Matrix::Zero(1, out)) {}

ad::Var Affine::forward(ad::Tape& tape, ad::Var x) {
  if (x.cols() != in_dim()) {
    throw DimensionError(weight.name + ": expected input width " + std::to_string(in_dim()) +
                         ", got " + std::to_string(x.cols()));
  }
  return ad::affine(x, tape.param(weight), tape.param(bias));
}

Mlp::Mlp(const std::string& name, const std::vector<Eigen::Index>& widths, Rng& rng,
         bool relu_last)
    : relu_last_(relu_last) {
  if (widths.size() < 2) throw ConfigError(name + ": an MLP needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool followed_by_relu = relu_last || i + 2 < widths.size();
    layers_.emplace_back(name + ".l" + std::to_string(i), widths[i], widths[i + 1], rng,
                         followed_by_relu ? std::sqrt(2.0) : 1.0);
  }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    if (relu_last_ || i + 1 < layers_.size()) x = ad::relu(x);
  }
  return x;
}

ParamList Mlp::params() {
  ParamList out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

}  // namespace imed
