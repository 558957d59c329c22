#include "imed/ensemble_core.hpp"

#include <cmath>
#include <string>

namespace imed {

std::string_view to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::avg:
      return "avg";
    case FusionKind::dense:
      return "dense";
    case FusionKind::shuffle:
      return "shuffle";
  }
  return "shuffle";
}

FusionKind parse_fusion_kind(std::string_view s) {
  if (s == "avg") return FusionKind::avg;
  if (s == "dense") return FusionKind::dense;
  if (s == "shuffle") return FusionKind::shuffle;
  throw ConfigError("unknown fusion kind '" + std::string(s) + "' (expected avg, dense or shuffle)");
}

std::vector<ShuffleLinearSpec> fusion_specs(const EnsembleConfig& cfg) {
  std::vector<ShuffleLinearSpec> specs;
  if (cfg.fusion_kind == FusionKind::avg) return specs;
  if (cfg.fusion_depth == 0) throw ConfigError("fusion_depth must be at least 1");
  const Eigen::Index h = cfg.fusion_kind == FusionKind::dense ? 1 : cfg.groups;
  const Eigen::Index d_f = cfg.feature_dim;
  for (std::size_t l = 0; l < cfg.fusion_depth; ++l) {
    const Eigen::Index d_in = l == 0 ? cfg.n_components * d_f : d_f;
    specs.push_back(ShuffleLinearSpec::make(d_in, d_f, h, cfg.tau));
  }
  return specs;
}

Matrix assemble_v2(std::span<const Matrix> features) {
  if (features.empty()) throw DimensionError("assemble_v2: no features");
  const Eigen::Index rows = features.front().rows(), cols = features.front().cols();
  Matrix out(rows, cols * static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].rows() != rows || features[i].cols() != cols) {
      throw DimensionError("assemble_v2: feature " + std::to_string(i + 1) + " is " +
                           std::to_string(features[i].rows()) + "x" +
                           std::to_string(features[i].cols()) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    out.middleCols(static_cast<Eigen::Index>(i) * cols, cols) = features[i];
  }
  return out;
}

EnsembleModel::EnsembleModel(const EnsembleConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  if (cfg.n_components < 2) throw ConfigError("ensemble needs at least two components");
  if (cfg.num_classes < 2) throw ConfigError("ensemble needs at least two classes");
  layout_ = FusionParamLayout::from_specs(fusion_specs(cfg));
  comp_cond_ = Conditioner(cfg.feature_dim, cfg.num_classes,
                           derive_seed(seed, "component-conditioning"), cfg.proj_dim);
  ens_cond_ = Conditioner(cfg.feature_dim, cfg.num_classes,
                          derive_seed(seed, "ensemble-conditioning"), cfg.proj_dim);

  const Eigen::Index total = layout_.total();
  out_scale_ = Matrix::Ones(1, total);
  for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(layout_.layers[l].fan_in()));
    out_scale_.middleCols(layout_.layer_offset(l), layout_.layer_size(l)).setConstant(s);
  }
  if (total > 0) {
    if (cfg.instance_aware) {
      Rng rng = make_stream(seed, "endogeny");
      endogeny_ = Mlp("endogeny", {v1_width(), cfg.endogeny_hidden, cfg.endogeny_hidden, total}, rng);
    } else {
      Rng rng = make_stream(seed, "static-fusion");
      static_fusion_ = Parameter("static_fusion", randn(1, total, rng));
    }
  }
  Rng head_rng = make_stream(seed, "ensemble-head");
  head_ = Affine("ensemble.head", cfg.feature_dim, cfg.num_classes, head_rng);
  Rng disc_rng = make_stream(seed, "ensemble-disc");
  disc_ = Discriminator("ensemble.disc", ens_cond_.width(), cfg.disc_hidden, disc_rng);
}

ad::Var EnsembleModel::fusion_parameters(ad::Tape& tape, std::span<const ad::Var> features,
                                         std::span<const ad::Var> logits) {
  const Eigen::Index batch = features.front().rows();
  if (layout_.total() == 0) return tape.constant(Matrix(batch, 0));
  ad::Var scale = tape.constant(out_scale_);
  if (!cfg_.instance_aware) return ad::mul(tape.param(static_fusion_), scale);
  std::vector<ad::Var> conds;
  conds.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    ad::Var g = cfg_.raw_logit_conditioning ? logits[i] : ad::softmax_rows(logits[i]);
    conds.push_back(comp_cond_.apply(features[i], g));
  }
  ad::Var v1 = ad::concat_cols(conds);
  if (v1.cols() != v1_width()) {
    throw DimensionError("ensemble: V1 width " + std::to_string(v1.cols()) + " != " +
                         std::to_string(v1_width()));
  }
  if (cfg_.normalize_v1) v1 = ad::rms_normalize_rows(v1);
  return ad::mul(endogeny_.forward(tape, v1), scale);
}

EnsembleModel::Vars EnsembleModel::forward(ad::Tape& tape, std::span<const ad::Var> features,
                                           std::span<const ad::Var> logits) {
  const auto n = static_cast<std::size_t>(cfg_.n_components);
  if (features.size() != n || logits.size() != n) {
    throw DimensionError("ensemble: expected outputs of " + std::to_string(n) + " components, got " +
                         std::to_string(features.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].cols() != cfg_.feature_dim || logits[i].cols() != cfg_.num_classes ||
        features[i].rows() != features[0].rows() || logits[i].rows() != features[0].rows()) {
      throw DimensionError("ensemble: component " + std::to_string(i + 1) +
                           " output shape does not match (d_f=" + std::to_string(cfg_.feature_dim) +
                           ", d_g=" + std::to_string(cfg_.num_classes) + ")");
    }
  }
  ad::Var params = fusion_parameters(tape, features, logits);
  ad::Var x;
  if (cfg_.fusion_kind == FusionKind::avg) {
    x = features[0];
    for (std::size_t i = 1; i < n; ++i) x = ad::add(x, features[i]);
    x = ad::scale(x, 1.0 / static_cast<double>(n));
  } else {
    x = ad::concat_cols(features);
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
      ad::Var p = ad::slice_cols(params, layout_.layer_offset(l), layout_.layer_size(l));
      x = ad::shuffle_linear(layout_.layers[l], p, x);
      if (l + 1 < layout_.layers.size()) x = ad::relu(x);
    }
  }
  ad::Var logits_out = head_.forward(tape, x);
  return {params, x, logits_out};
}

EnsembleOutput EnsembleModel::evaluate(std::span<const Matrix> features,
                                       std::span<const Matrix> logits) {
  ad::Tape tape;
  std::vector<ad::Var> fv, gv;
  for (const auto& f : features) fv.push_back(tape.constant(f));
  for (const auto& g : logits) gv.push_back(tape.constant(g));
  auto out = forward(tape, fv, gv);
  EnsembleOutput res;
  res.fusion_params = out.fusion_params.value();
  if (res.fusion_params.rows() == 1 && out.feature.rows() != 1) {
    res.fusion_params = res.fusion_params.replicate(out.feature.rows(), 1).eval();
  }
  res.ensemble_feature = out.feature.value();
  res.ensemble_logits = out.logits.value();
  return res;
}

ad::Var EnsembleModel::discriminator_input(ad::Var feature, ad::Var logits) const {
  ad::Var g = cfg_.raw_logit_conditioning ? logits : ad::softmax_rows(logits);
  return ens_cond_.apply(feature, g);
}

ParamList EnsembleModel::endogeny_params() {
  if (layout_.total() == 0) return {};
  if (!cfg_.instance_aware) return {&static_fusion_};
  return endogeny_.params();
}

ParamList EnsembleModel::model_params() {
  ParamList p = endogeny_params();
  for (auto* h : head_.params()) p.push_back(h);
  return p;
}

void EnsembleModel::set_constant_fusion(const Matrix& row) {
  if (row.rows() != 1 || row.cols() != layout_.total()) {
    throw DimensionError("set_constant_fusion: expected 1x" + std::to_string(layout_.total()));
  }
  Matrix raw = row.cwiseQuotient(out_scale_);
  if (!cfg_.instance_aware) {
    static_fusion_.value = raw;
    return;
  }
  for (auto& l : endogeny_.layers()) {
    l.weight.value.setZero();
    l.bias.value.setZero();
  }
  endogeny_.layers().back().bias.value = raw;
}

Matrix averaging_params(const EnsembleModel& model) {
  const auto& cfg = model.config();
  if (model.layout().layers.size() != 1) {
    throw ConfigError("averaging_params: needs a fusion sub-network of depth 1");
  }
  return averaging_params(model.layout().layers.front(), cfg.n_components, cfg.feature_dim);
}

Matrix averaging_params(const ShuffleLinearSpec& spec, int n_components, Eigen::Index feature_dim) {
  if (spec.d_in != n_components * feature_dim || spec.d_out != feature_dim) {
    throw ConfigError("averaging_params: layer must map n*d_f inputs to d_f outputs");
  }
  const Eigen::Index o = spec.group_out(), k = spec.group_in();
  const double w = 1.0 / static_cast<double>(n_components);
  Matrix params = Matrix::Zero(1, spec.param_count());
  for (Eigen::Index j = 0; j < spec.groups; ++j) {
    for (Eigen::Index r = 0; r < o; ++r) {
      const Eigen::Index out = j * o + r;
      for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::Index in = spec.input_index(j, c);
        if (in % feature_dim == out) params(0, spec.block_offset(j) + r * k + c) = w;
      }
    }
  }
  // Verify against the dense averaging matrix: catches diagonal entries that
  // fall outside the support and shared blocks that cannot serve every group.
  Matrix expect = Matrix::Zero(feature_dim, spec.d_in);
  for (int i = 0; i < n_components; ++i)
    for (Eigen::Index d = 0; d < feature_dim; ++d) expect(d, i * feature_dim + d) = w;
  const Matrix got = materialize(spec, std::span<const double>(params.data(), params.size()));
  if ((got - expect).cwiseAbs().maxCoeff() > 0.0) {
    throw ConfigError(
        "averaging_params: with n=" + std::to_string(n_components) + ", d_f=" +
        std::to_string(feature_dim) + ", h=" + std::to_string(spec.groups) +
        " the diagonal entry for output k and component i (input i*d_f+k) does not lie in "
        "output group k's subgroup of input group (i*d_f+k)/(d_i/h); choose h = 1 or h = n");
  }
  return params;
}

Lemma2Result lemma2_check(const Matrix& weight, const Matrix& bias,
                          std::span<const Matrix> features) {
  if (features.empty()) throw DimensionError("lemma2_check: no features");
  const double n = static_cast<double>(features.size());
  Matrix label_sum = Matrix::Zero(features.front().rows(), weight.cols());
  Matrix feat_sum = Matrix::Zero(features.front().rows(), features.front().cols());
  for (const auto& f : features) {
    Matrix g = f * weight;
    g.rowwise() += bias.row(0);
    label_sum += g;
    feat_sum += f;
  }
  Lemma2Result r;
  r.label_avg = label_sum / n;
  r.feat_avg_label = (feat_sum / n) * weight;
  r.feat_avg_label.rowwise() += bias.row(0);
  return r;
}

}  // namespace imed
