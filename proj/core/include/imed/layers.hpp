#pragma once

#include <string>
#include <vector>

#include "imed/autodiff.hpp"

namespace imed {

/// y = x W + b, W stored (in x out).
class Affine {
 public:
  Affine() = default;
  /// Weights ~ N(0, gain^2 / in), zero bias.
  Affine(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng, double gain = 1.0);

  ad::Var forward(ad::Tape& tape, ad::Var x);

  Eigen::Index in_dim() const { return weight.value.rows(); }
  Eigen::Index out_dim() const { return weight.value.cols(); }
  ParamList params() { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;
};

/// Stack of affine layers with ReLU between them. The last layer is linear
/// unless relu_last is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<Eigen::Index>& widths, Rng& rng,
      bool relu_last = false);

  ad::Var forward(ad::Tape& tape, ad::Var x);

  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }
  ParamList params();
  std::vector<Affine>& layers() { return layers_; }
  const std::vector<Affine>& layers() const { return layers_; }

 private:
  std::vector<Affine> layers_;
  bool relu_last_ = false;
};

}  // namespace imed
