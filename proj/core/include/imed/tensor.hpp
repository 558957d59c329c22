#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace imed {

/// Row-major dense matrix. Every batch is laid out one instance per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

using ParamList = std::vector<Parameter*>;

void zero_grads(const ParamList& params);
std::size_t count_params(const ParamList& params);
/// Euclidean norm over the concatenation of all gradients.
double grad_norm(const ParamList& params);
/// Rescales the joint gradient to norm `max_norm` when it is larger; returns
/// the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const ParamList& params, double max_norm);
/// Drops repeated pointers (shared heads appear once per component).
ParamList unique_params(const ParamList& params);

using Rng = std::mt19937_64;

/// Independent deterministic stream derived from a master seed and a purpose tag.
Rng make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

Matrix randn(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev = 1.0);
Matrix rand_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi);

}  // namespace imed
