#pragma once

// Instance-aware ensemble E.
//
//   V1 = (T(f_1, g_1), ..., T(f_n, g_n))          conditioning of every component
//   P  = endogeny(V1)                              FC1-ReLU-FC2-ReLU-FC3, per instance
//   V2 = (f_1, ..., f_n)
//   f  = fusion_P(V2)                              shuffle layers, ReLU between
//   g  = J(f)
//
// The discriminator D sees T(f, softmax(g)) of the ensemble output.

#include <span>
#include <vector>

#include "imed/conditioning.hpp"
#include "imed/layers.hpp"
#include "imed/losses.hpp"
#include "imed/shuffle_linear.hpp"

namespace imed {

enum class FusionKind { avg, dense, shuffle };

std::string_view to_string(FusionKind kind);
FusionKind parse_fusion_kind(std::string_view s);

struct EnsembleConfig {
  int n_components = 2;
  Eigen::Index feature_dim = 32;
  int num_classes = 2;
  FusionKind fusion_kind = FusionKind::shuffle;
  std::size_t fusion_depth = 2;
  Eigen::Index groups = 128;
  Eigen::Index tau = kDefaultShareThreshold;
  /// false: one learned fusion parameter vector shared by all instances.
  bool instance_aware = true;
  Eigen::Index endogeny_hidden = 256;
  Eigen::Index disc_hidden = 1024;
  Eigen::Index proj_dim = kDefaultProjectionDim;
  bool raw_logit_conditioning = false;
  /// RMS-normalize each row of V1 before the endogeny network.
  bool normalize_v1 = true;
};

/// Layer specs of the fusion sub-network: n*d_f -> d_f, then d_f -> d_f.
/// `dense` uses h = 1 (fully connected); `avg` has no layers.
std::vector<ShuffleLinearSpec> fusion_specs(const EnsembleConfig& cfg);

/// Column-wise concatenation of component features in component order.
Matrix assemble_v2(std::span<const Matrix> features);

struct EnsembleOutput {
  Matrix fusion_params;     // B x P_total
  Matrix ensemble_feature;  // B x d_e
  Matrix ensemble_logits;   // B x d_g
};

class EnsembleModel {
 public:
  struct Vars {
    ad::Var fusion_params;
    ad::Var feature;
    ad::Var logits;
  };

  EnsembleModel() = default;
  EnsembleModel(const EnsembleConfig& cfg, std::uint64_t seed);

  Vars forward(ad::Tape& tape, std::span<const ad::Var> features,
               std::span<const ad::Var> logits);
  EnsembleOutput evaluate(std::span<const Matrix> features, std::span<const Matrix> logits);

  /// Conditioning vector fed to D for an ensemble (feature, logits) pair.
  ad::Var discriminator_input(ad::Var feature, ad::Var logits) const;

  /// theta_E: endogeny (or the static fusion vector when not instance-aware).
  ParamList endogeny_params();
  /// theta_J
  ParamList head_params() { return head_.params(); }
  /// theta_E and theta_J together (the SAM group).
  ParamList model_params();
  /// theta_D
  ParamList disc_params() { return disc_.params(); }

  /// Makes the endogeny output the constant `row` for every instance:
  /// FC weights zeroed, FC3 bias set so the scaled output equals `row`.
  void set_constant_fusion(const Matrix& row);

  const EnsembleConfig& config() const { return cfg_; }
  const FusionParamLayout& layout() const { return layout_; }
  const Conditioner& component_conditioner() const { return comp_cond_; }
  const Conditioner& ensemble_conditioner() const { return ens_cond_; }
  Eigen::Index v1_width() const { return cfg_.n_components * comp_cond_.width(); }
  /// Per-column multiplier applied to the raw endogeny output.
  const Matrix& output_scale() const { return out_scale_; }
  std::uint64_t seed() const { return seed_; }

  Mlp& endogeny() { return endogeny_; }
  Parameter& static_fusion() { return static_fusion_; }
  Affine& head() { return head_; }
  Discriminator& discriminator() { return disc_; }

 private:
  ad::Var fusion_parameters(ad::Tape& tape, std::span<const ad::Var> features,
                            std::span<const ad::Var> logits);

  EnsembleConfig cfg_;
  std::uint64_t seed_ = 0;
  FusionParamLayout layout_;
  Conditioner comp_cond_;
  Conditioner ens_cond_;
  Mlp endogeny_;
  Parameter static_fusion_;
  Matrix out_scale_;
  Affine head_;
  Discriminator disc_;
};

/// Flat fusion parameters under which a depth-1 fusion layer outputs the
/// mean of the n component features. Throws when the wiring cannot place
/// every averaging weight (the diagonal entries must fall inside the
/// shuffle support).
Matrix averaging_params(const EnsembleModel& model);
Matrix averaging_params(const ShuffleLinearSpec& spec, int n_components, Eigen::Index feature_dim);

struct Lemma2Result {
  Matrix label_avg;       // (1/n) sum_i J(f_i)
  Matrix feat_avg_label;  // J((1/n) sum_i f_i)
};

/// Label averaging versus feature averaging under one affine head
/// (weight stored in x out, bias 1 x out).
Lemma2Result lemma2_check(const Matrix& weight, const Matrix& bias,
                          std::span<const Matrix> features);

}  // namespace imed
