#include "imed/shuffle_linear.hpp"

#include <string>

namespace imed {

namespace {

using BlockMap = Eigen::Map<const Matrix>;

std::string dims(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index h) {
  return "(d_i=" + std::to_string(d_in) + ", d_o=" + std::to_string(d_out) +
         ", h=" + std::to_string(h) + ")";
}

}  // namespace

bool ShuffleLinearSpec::valid(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index groups) {
  return d_in > 0 && d_out > 0 && groups > 0 && d_in % groups == 0 && d_out % groups == 0 &&
         d_in % (groups * groups) == 0;
}

Eigen::Index ShuffleLinearSpec::count(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index groups,
                                      bool shared) {
  const Eigen::Index div = shared ? groups * groups : groups;
  if (d_in <= 0 || d_out <= 0 || groups <= 0 || d_in % groups != 0 || d_out % groups != 0 ||
      (d_in * d_out) % div != 0) {
    throw ConfigError("shuffle linear count (d_i=" + std::to_string(d_in) + ", d_o=" +
                      std::to_string(d_out) + ", h=" + std::to_string(groups) +
                      "): h must divide both widths");
  }
  return d_in * d_out / div;
}

ShuffleLinearSpec ShuffleLinearSpec::make(Eigen::Index d_in, Eigen::Index d_out,
                                          Eigen::Index groups, Eigen::Index tau) {
  ShuffleLinearSpec s{d_in, d_out, groups, tau};
  s.validate();
  return s;
}

void ShuffleLinearSpec::validate() const {
  if (d_in <= 0 || d_out <= 0 || groups <= 0) {
    throw ConfigError("shuffle linear " + dims(d_in, d_out, groups) + ": sizes must be positive");
  }
  if (d_in % groups != 0 || d_out % groups != 0) {
    throw ConfigError("shuffle linear " + dims(d_in, d_out, groups) +
                      ": h must divide both d_i and d_o");
  }
  if (d_in % (groups * groups) != 0) {
    throw ConfigError("shuffle linear " + dims(d_in, d_out, groups) +
                      ": h^2 must divide d_i so each input group splits into h subgroups");
  }
  if (tau <= 0) throw ConfigError("shuffle linear: sharing threshold tau must be positive");
}

Matrix Wiring::mask() const {
  Matrix m = Matrix::Zero(spec.d_out, spec.d_in);
  const Eigen::Index o = spec.group_out();
  for (Eigen::Index j = 0; j < spec.groups; ++j) {
    for (Eigen::Index r = 0; r < o; ++r) {
      for (Eigen::Index c : group_inputs[static_cast<std::size_t>(j)]) m(j * o + r, c) = 1.0;
    }
  }
  return m;
}

Wiring wiring(const ShuffleLinearSpec& spec) {
  spec.validate();
  Wiring w{spec, {}};
  w.group_inputs.resize(static_cast<std::size_t>(spec.groups));
  for (Eigen::Index j = 0; j < spec.groups; ++j) {
    auto& cols = w.group_inputs[static_cast<std::size_t>(j)];
    cols.reserve(static_cast<std::size_t>(spec.group_in()));
    for (Eigen::Index c = 0; c < spec.group_in(); ++c) cols.push_back(spec.input_index(j, c));
  }
  return w;
}

Matrix materialize(const ShuffleLinearSpec& spec, std::span<const double> params) {
  spec.validate();
  if (static_cast<Eigen::Index>(params.size()) != spec.param_count()) {
    throw DimensionError("materialize: expected " + std::to_string(spec.param_count()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  const Eigen::Index o = spec.group_out(), k = spec.group_in();
  Matrix w = Matrix::Zero(spec.d_out, spec.d_in);
  for (Eigen::Index j = 0; j < spec.groups; ++j) {
    BlockMap blk(params.data() + spec.block_offset(j), o, k);
    for (Eigen::Index r = 0; r < o; ++r)
      for (Eigen::Index c = 0; c < k; ++c) w(j * o + r, spec.input_index(j, c)) = blk(r, c);
  }
  return w;
}

namespace {

// y (B x d_out) from x (B x d_in); params has one row, or one row per instance.
void forward_kernel(const ShuffleLinearSpec& spec, const Matrix& params, const Matrix& x,
                    Matrix& y) {
  const Eigen::Index o = spec.group_out(), k = spec.group_in();
  const bool per_instance = params.rows() > 1 || x.rows() == 1;
  y.setZero(x.rows(), spec.d_out);
  Eigen::VectorXd gathered(k);
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    const double* prow = params.row(per_instance ? b : 0).data();
    for (Eigen::Index j = 0; j < spec.groups; ++j) {
      for (Eigen::Index c = 0; c < k; ++c) gathered(c) = x(b, spec.input_index(j, c));
      BlockMap blk(prow + spec.block_offset(j), o, k);
      y.row(b).segment(j * o, o) = (blk * gathered).transpose();
    }
  }
}

void check_shapes(const ShuffleLinearSpec& spec, const Matrix& params, const Matrix& x,
                  bool per_instance) {
  spec.validate();
  if (x.cols() != spec.d_in) {
    throw DimensionError("shuffle linear: input width " + std::to_string(x.cols()) +
                         " != d_i " + std::to_string(spec.d_in));
  }
  if (params.cols() != spec.param_count()) {
    throw DimensionError("shuffle linear: expected " + std::to_string(spec.param_count()) +
                         " parameters per row, got " + std::to_string(params.cols()));
  }
  if (per_instance && params.rows() != x.rows()) {
    throw DimensionError("shuffle linear: " + std::to_string(params.rows()) +
                         " parameter rows for a batch of " + std::to_string(x.rows()));
  }
}

}  // namespace

Matrix shuffle_forward(const ShuffleLinearSpec& spec, std::span<const double> params,
                       const Matrix& x) {
  Matrix p = Eigen::Map<const Matrix>(params.data(), 1, static_cast<Eigen::Index>(params.size()));
  check_shapes(spec, p, x, false);
  Matrix y;
  forward_kernel(spec, p, x, y);
  return y;
}

Matrix shuffle_forward_per_instance(const ShuffleLinearSpec& spec, const Matrix& params,
                                    const Matrix& x) {
  check_shapes(spec, params, x, true);
  Matrix y;
  forward_kernel(spec, params, x, y);
  return y;
}

namespace ad {

Var shuffle_linear(const ShuffleLinearSpec& spec, Var params, Var x) {
  const bool per_instance = params.rows() != 1 || x.rows() == 1;
  check_shapes(spec, params.value(), x.value(), per_instance);
  Matrix y;
  forward_kernel(spec, params.value(), x.value(), y);
  return x.tape->record(std::move(y), {params, x}, [spec, params, x](const Matrix& gy, Tape& t) {
    const Matrix& pv = params.value();
    const Matrix& xv = x.value();
    const Eigen::Index o = spec.group_out(), k = spec.group_in();
    const bool per_row = pv.rows() > 1 || xv.rows() == 1;
    const bool want_p = t.requires_grad(params);
    const bool want_x = t.requires_grad(x);
    Matrix gp = want_p ? Matrix::Zero(pv.rows(), pv.cols()) : Matrix();
    Matrix gx = want_x ? Matrix::Zero(xv.rows(), xv.cols()) : Matrix();
    Eigen::VectorXd gathered(k);
    for (Eigen::Index b = 0; b < xv.rows(); ++b) {
      const Eigen::Index prow = per_row ? b : 0;
      for (Eigen::Index j = 0; j < spec.groups; ++j) {
        Eigen::VectorXd gseg = gy.row(b).segment(j * o, o).transpose();
        if (want_p) {
          for (Eigen::Index c = 0; c < k; ++c) gathered(c) = xv(b, spec.input_index(j, c));
          Eigen::Map<Matrix> gblk(gp.row(prow).data() + spec.block_offset(j), o, k);
          gblk.noalias() += gseg * gathered.transpose();
        }
        if (want_x) {
          BlockMap blk(pv.row(prow).data() + spec.block_offset(j), o, k);
          Eigen::VectorXd gin = blk.transpose() * gseg;
          for (Eigen::Index c = 0; c < k; ++c) gx(b, spec.input_index(j, c)) += gin(c);
        }
      }
    }
    if (want_p) t.accumulate(params, gp);
    if (want_x) t.accumulate(x, gx);
  });
}

}  // namespace ad

FusionParamLayout FusionParamLayout::from_specs(std::vector<ShuffleLinearSpec> specs) {
  FusionParamLayout layout;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    specs[l].validate();
    if (l > 0 && specs[l].d_in != specs[l - 1].d_out) {
      throw ConfigError("fusion layout: layer " + std::to_string(l) + " input width " +
                        std::to_string(specs[l].d_in) + " does not match previous output " +
                        std::to_string(specs[l - 1].d_out));
    }
    layout.layer_offsets.push_back(offset);
    const Eigen::Index nblocks = specs[l].shared() ? 1 : specs[l].groups;
    for (Eigen::Index j = 0; j < nblocks; ++j) {
      layout.blocks.push_back({l, specs[l].group_out(), specs[l].group_in(), offset});
      offset += specs[l].block_size();
    }
  }
  layout.layers = std::move(specs);
  layout.validate();
  return layout;
}

Eigen::Index FusionParamLayout::total() const {
  Eigen::Index t = 0;
  for (const auto& s : layers) t += s.param_count();
  return t;
}

void FusionParamLayout::validate() const {
  Eigen::Index expect = 0;
  for (const auto& b : blocks) {
    if (b.offset != expect) throw ConfigError("fusion layout: blocks are not contiguous");
    expect += b.size();
  }
  if (expect != total()) throw ConfigError("fusion layout: block sizes do not sum to the total");
}

}  // namespace imed
