#pragma once

// Feature/label conditioning map T(f, g) and the endogeny input V1.
//
// The exact multilinear map is the flattened outer product f ⊗ g. Once
// d_f * d_g exceeds 4096 it is replaced by the randomized map
// (1/sqrt(d)) (W_f f) ⊙ (W_g g) with frozen standard-normal W_f, W_g.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "imed/autodiff.hpp"

namespace imed {

inline constexpr Eigen::Index kExactConditioningLimit = 4096;
inline constexpr Eigen::Index kDefaultProjectionDim = 1024;

enum class ConditioningMode { ml, rml };

/// Exact map when d_f * d_g <= 4096 (boundary inclusive).
ConditioningMode conditioning_mode(Eigen::Index d_f, Eigen::Index d_g);
Eigen::Index conditioning_width(Eigen::Index d_f, Eigen::Index d_g,
                                Eigen::Index proj_dim = kDefaultProjectionDim);

/// Frozen random projections. Never registered with an optimizer; persisted
/// by seed and regenerated bit-identically.
struct RandomProjection {
  std::uint64_t seed = 0;
  Matrix w_f;  // d x d_f
  Matrix w_g;  // d x d_g

  static RandomProjection generate(std::uint64_t seed, Eigen::Index d_f, Eigen::Index d_g,
                                   Eigen::Index d = kDefaultProjectionDim);

  Eigen::Index dim() const { return w_f.rows(); }
  Eigen::Index d_f() const { return w_f.cols(); }
  Eigen::Index d_g() const { return w_g.cols(); }
};

struct ConditioningVector {
  Matrix values;  // B x len
  ConditioningMode mode = ConditioningMode::ml;
};

Vector t_ml(const Vector& f, const Vector& g);
Vector t_rml(const RandomProjection& proj, const Vector& f, const Vector& g);

/// Batched T(f, g); proj is required only when the randomized map applies.
ConditioningVector condition(const RandomProjection* proj, const Matrix& f, const Matrix& g);

/// Row-wise concatenation of per-component conditioning in component order.
Matrix assemble_v1(std::span<const ConditioningVector> conds);

namespace ad {
Var t_rml(const RandomProjection& proj, Var f, Var g);
Var condition(const RandomProjection* proj, Var f, Var g);
}  // namespace ad

/// Owns the projection (if one is needed) for a fixed (d_f, d_g) pair.
class Conditioner {
 public:
  Conditioner() = default;
  Conditioner(Eigen::Index d_f, Eigen::Index d_g, std::uint64_t seed,
              Eigen::Index proj_dim = kDefaultProjectionDim);

  ConditioningMode mode() const { return conditioning_mode(d_f_, d_g_); }
  Eigen::Index width() const;
  Eigen::Index d_f() const { return d_f_; }
  Eigen::Index d_g() const { return d_g_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index proj_dim() const { return proj_dim_; }
  const RandomProjection* projection() const { return proj_ ? &*proj_ : nullptr; }

  ConditioningVector apply(const Matrix& f, const Matrix& g) const;
  ad::Var apply(ad::Var f, ad::Var g) const;

 private:
  Eigen::Index d_f_ = 0;
  Eigen::Index d_g_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::Index proj_dim_ = kDefaultProjectionDim;
  std::optional<RandomProjection> proj_;
};

}  // namespace imed
