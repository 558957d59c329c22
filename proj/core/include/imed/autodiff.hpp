#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation of one forward pass. Leaves are either
// constants, free variables (gradient readable from the tape) or bound
// Parameters (gradient accumulated into Parameter::grad by backward()).

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "imed/tensor.hpp"

namespace imed::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Binds p by reference; p.value must stay unchanged while this tape is used.
  Var param(Parameter& p);

  /// Records a derived node. fn receives d(root)/d(this node) and must
  /// forward it to the parents through accumulate().
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);

  void accumulate(Var v, const Matrix& g);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  const Matrix& value(Var v) const {
    const auto& n = nodes_[v.id];
    return n.param != nullptr ? n.param->value : n.value;
  }
  /// Gradient of the last backward() root w.r.t. v (zero matrix if unreached).
  Matrix grad(Var v) const;

  /// root must be 1x1. Node gradients are reset first, so one tape can be
  /// differentiated from several roots in turn; bound Parameters accumulate.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;  // deque: references stay valid on push_back
};

// Elementwise binary ops; `b` may broadcast as 1x1, rows x 1 or 1 x cols.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);
/// x * W + b with W shaped (in x out) and b shaped (1 x out).
Var affine(Var x, Var w, Var b);

Var relu(Var a);
Var sigmoid(Var a);
/// log(1 + exp(a)), computed stably.
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);

Var sum(Var a);
Var mean(Var a);
/// rows x 1: sum across each row.
Var sum_rows(Var a);
/// 1 x cols: sum down each column.
Var sum_cols(Var a);
Var trace(Var a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index width);

/// Row b of the result is the row-major flattening of f_b ⊗ g_b:
/// out[b, k*dg + j] = f[b,k] * g[b,j].
Var rowwise_outer(Var f, Var g);

/// Each row divided by its root mean square: x / sqrt(mean(x^2) + eps).
Var rms_normalize_rows(Var a, double eps = 1e-8);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const int> labels);
/// Mean over rows of -sum_j target[b,j] * log softmax(logits)[b,j].
Var soft_cross_entropy(Var target_probs, Var logits);

/// Identity forward; backward multiplies the incoming gradient by -coeff.
Var grad_reverse(Var a, double coeff);

/// out[i,j] = ||a_i - b_j||^2.
Var pairwise_sqdist(Var a, Var b);

}  // namespace imed::ad
