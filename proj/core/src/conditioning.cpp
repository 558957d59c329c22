#include "imed/conditioning.hpp"

#include <cmath>
#include <string>

namespace imed {

ConditioningMode conditioning_mode(Eigen::Index d_f, Eigen::Index d_g) {
  return d_f * d_g <= kExactConditioningLimit ? ConditioningMode::ml : ConditioningMode::rml;
}

Eigen::Index conditioning_width(Eigen::Index d_f, Eigen::Index d_g, Eigen::Index proj_dim) {
  return conditioning_mode(d_f, d_g) == ConditioningMode::ml ? d_f * d_g : proj_dim;
}

RandomProjection RandomProjection::generate(std::uint64_t seed, Eigen::Index d_f,
                                            Eigen::Index d_g, Eigen::Index d) {
  if (d <= 0 || d_f <= 0 || d_g <= 0) throw ConfigError("random projection: dimensions must be positive");
  Rng rng = make_stream(seed, "random-projection");
  RandomProjection p;
  p.seed = seed;
  p.w_f = randn(d, d_f, rng);
  p.w_g = randn(d, d_g, rng);
  return p;
}

Vector t_ml(const Vector& f, const Vector& g) {
  Vector out(f.size() * g.size());
  for (Eigen::Index k = 0; k < f.size(); ++k)
    for (Eigen::Index j = 0; j < g.size(); ++j) out(k * g.size() + j) = f(k) * g(j);
  return out;
}

Vector t_rml(const RandomProjection& proj, const Vector& f, const Vector& g) {
  if (f.size() != proj.d_f() || g.size() != proj.d_g()) {
    throw DimensionError("t_rml: projection expects d_f=" + std::to_string(proj.d_f()) +
                         ", d_g=" + std::to_string(proj.d_g()) + " but got " +
                         std::to_string(f.size()) + ", " + std::to_string(g.size()));
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(proj.dim()));
  return s * (proj.w_f * f).cwiseProduct(proj.w_g * g);
}

ConditioningVector condition(const RandomProjection* proj, const Matrix& f, const Matrix& g) {
  if (f.rows() != g.rows()) throw DimensionError("condition: feature and label batch sizes differ");
  ConditioningVector out;
  out.mode = conditioning_mode(f.cols(), g.cols());
  if (out.mode == ConditioningMode::ml) {
    out.values.resize(f.rows(), f.cols() * g.cols());
    for (Eigen::Index b = 0; b < f.rows(); ++b)
      for (Eigen::Index k = 0; k < f.cols(); ++k)
        for (Eigen::Index j = 0; j < g.cols(); ++j) out.values(b, k * g.cols() + j) = f(b, k) * g(b, j);
    return out;
  }
  if (proj == nullptr) {
    throw ConfigError("condition: d_f*d_g=" + std::to_string(f.cols() * g.cols()) +
                      " exceeds 4096 and needs a random projection");
  }
  if (f.cols() != proj->d_f() || g.cols() != proj->d_g()) {
    throw DimensionError("condition: projection dimensions do not match the inputs");
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(proj->dim()));
  Matrix pf = f * proj->w_f.transpose();
  Matrix pg = g * proj->w_g.transpose();
  out.values = s * pf.cwiseProduct(pg);
  return out;
}

Matrix assemble_v1(std::span<const ConditioningVector> conds) {
  if (conds.empty()) throw DimensionError("assemble_v1: no conditioning vectors");
  const Eigen::Index rows = conds.front().values.rows();
  const Eigen::Index len = conds.front().values.cols();
  for (std::size_t i = 0; i < conds.size(); ++i) {
    if (conds[i].values.rows() != rows || conds[i].values.cols() != len) {
      throw DimensionError("assemble_v1: component " + std::to_string(i + 1) +
                           " has shape " + std::to_string(conds[i].values.rows()) + "x" +
                           std::to_string(conds[i].values.cols()) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(len));
    }
  }
  Matrix out(rows, len * static_cast<Eigen::Index>(conds.size()));
  for (std::size_t i = 0; i < conds.size(); ++i) {
    out.middleCols(static_cast<Eigen::Index>(i) * len, len) = conds[i].values;
  }
  return out;
}

namespace ad {

Var t_rml(const RandomProjection& proj, Var f, Var g) {
  if (f.cols() != proj.d_f() || g.cols() != proj.d_g()) {
    throw DimensionError("t_rml: projection dimensions do not match the inputs");
  }
  Tape& t = *f.tape;
  Var wf = t.constant(proj.w_f.transpose());
  Var wg = t.constant(proj.w_g.transpose());
  return scale(mul(matmul(f, wf), matmul(g, wg)), 1.0 / std::sqrt(static_cast<double>(proj.dim())));
}

Var condition(const RandomProjection* proj, Var f, Var g) {
  if (f.rows() != g.rows()) throw DimensionError("condition: feature and label batch sizes differ");
  if (conditioning_mode(f.cols(), g.cols()) == ConditioningMode::ml) return rowwise_outer(f, g);
  if (proj == nullptr) {
    throw ConfigError("condition: d_f*d_g=" + std::to_string(f.cols() * g.cols()) +
                      " exceeds 4096 and needs a random projection");
  }
  return t_rml(*proj, f, g);
}

}  // namespace ad

Conditioner::Conditioner(Eigen::Index d_f, Eigen::Index d_g, std::uint64_t seed,
                         Eigen::Index proj_dim)
    : d_f_(d_f), d_g_(d_g), seed_(seed), proj_dim_(proj_dim) {
  if (conditioning_mode(d_f, d_g) == ConditioningMode::rml) {
    proj_ = RandomProjection::generate(seed, d_f, d_g, proj_dim);
  }
}

Eigen::Index Conditioner::width() const { return conditioning_width(d_f_, d_g_, proj_dim_); }

ConditioningVector Conditioner::apply(const Matrix& f, const Matrix& g) const {
  return condition(projection(), f, g);
}

ad::Var Conditioner::apply(ad::Var f, ad::Var g) const { return ad::condition(projection(), f, g); }

}  // namespace imed
