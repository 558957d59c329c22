#pragma once

// Shuffle linear layer.
//
// The d_i inputs are split into h groups of d_i/h, each group into h
// subgroups of d_i/h^2. Output group j (d_o/h wide) reads subgroup j of every
// input group, i.e. a channel shuffle followed by a block-diagonal linear map
// with h blocks of shape (d_o/h) x (d_i/h). Below the sharing threshold
// (h < tau) all h blocks use one weight block.
//
// Flat parameter layout, per layer: block j is stored row-major as
// W_j[o, c] at offset j*(d_o/h)*(d_i/h) (shared: one block at offset 0),
// where column c = i*(d_i/h^2) + t addresses element t of subgroup j of
// input group i. No bias.

#include <span>
#include <vector>

#include "imed/autodiff.hpp"

namespace imed {

inline constexpr Eigen::Index kDefaultShareThreshold = 128;

struct ShuffleLinearSpec {
  Eigen::Index d_in = 0;
  Eigen::Index d_out = 0;
  Eigen::Index groups = 1;
  Eigen::Index tau = kDefaultShareThreshold;

  /// Throws ConfigError unless h | d_in, h | d_out and h^2 | d_in.
  static ShuffleLinearSpec make(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index groups,
                                Eigen::Index tau = kDefaultShareThreshold);
  static bool valid(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index groups);
  /// Weight count d_in*d_out/h (shared: /h^2) from the divisibility of h alone;
  /// a triple can have a count without admitting the subgroup wiring.
  static Eigen::Index count(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index groups, bool shared);
  void validate() const;

  bool shared() const { return groups < tau; }
  Eigen::Index group_in() const { return d_in / groups; }
  Eigen::Index group_out() const { return d_out / groups; }
  Eigen::Index subgroup() const { return d_in / (groups * groups); }
  Eigen::Index block_size() const { return group_in() * group_out(); }
  Eigen::Index param_count() const { return shared() ? block_size() : groups * block_size(); }
  /// Inputs feeding each output (the fan-in of every block row).
  Eigen::Index fan_in() const { return group_in(); }

  /// Input index read by column c of output group j's block.
  Eigen::Index input_index(Eigen::Index j, Eigen::Index c) const {
    const Eigen::Index s = subgroup();
    return (c / s) * group_in() + j * s + (c % s);
  }
  Eigen::Index block_offset(Eigen::Index j) const { return shared() ? 0 : j * block_size(); }
};

/// Connectivity: for each output group, the input indices its block reads,
/// in block-column order.
struct Wiring {
  ShuffleLinearSpec spec;
  std::vector<std::vector<Eigen::Index>> group_inputs;

  /// d_out x d_in 0/1 support mask.
  Matrix mask() const;
};

Wiring wiring(const ShuffleLinearSpec& spec);

/// Dense d_out x d_in matrix W with y = W x, reconstructed from one parameter row.
Matrix materialize(const ShuffleLinearSpec& spec, std::span<const double> params);

/// Owned parameters: params has spec.param_count() entries, shared by every row of x.
Matrix shuffle_forward(const ShuffleLinearSpec& spec, std::span<const double> params,
                       const Matrix& x);
/// Per-instance parameters: row b of params drives row b of x.
Matrix shuffle_forward_per_instance(const ShuffleLinearSpec& spec, const Matrix& params,
                                    const Matrix& x);

namespace ad {
/// params is 1 x P (broadcast over the batch) or B x P (one row per instance).
Var shuffle_linear(const ShuffleLinearSpec& spec, Var params, Var x);
}  // namespace ad

/// Where each weight block of a multi-layer fusion network lives inside one
/// flat parameter vector.
struct FusionParamLayout {
  struct Block {
    std::size_t layer = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;
    Eigen::Index size() const { return rows * cols; }
  };

  std::vector<ShuffleLinearSpec> layers;
  std::vector<Block> blocks;
  std::vector<Eigen::Index> layer_offsets;

  static FusionParamLayout from_specs(std::vector<ShuffleLinearSpec> specs);
  Eigen::Index total() const;
  Eigen::Index layer_offset(std::size_t layer) const { return layer_offsets.at(layer); }
  Eigen::Index layer_size(std::size_t layer) const { return layers.at(layer).param_count(); }
  /// Throws if blocks overlap, leave gaps, or do not sum to total().
  void validate() const;
};

}  // namespace imed
