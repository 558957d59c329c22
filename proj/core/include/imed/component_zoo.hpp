#pragma once

// Component UDA learners F_i (MLP backbone) + G_i (affine head) and their
// individual training losses.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imed/conditioning.hpp"
#include "imed/data.hpp"
#include "imed/layers.hpp"
#include "imed/losses.hpp"

namespace imed {

enum class MethodTag { source_only, jan_like, cdan_like };

std::string_view to_string(MethodTag tag);
MethodTag parse_method_tag(std::string_view s);

struct BackboneSpec {
  Eigen::Index input_dim = 2;
  std::vector<Eigen::Index> hidden{64, 64};
  Eigen::Index feature_dim = 32;

  std::vector<Eigen::Index> widths() const;
};

struct ComponentOptions {
  /// Weight of the MMD / adversarial term next to source cross-entropy.
  double transfer_weight = 1.0;
  Eigen::Index disc_hidden = 64;
  Eigen::Index proj_dim = kDefaultProjectionDim;
  /// Feed raw logits instead of softmax probabilities into the conditioning map.
  bool raw_logit_conditioning = false;
};

class ComponentModel {
 public:
  struct Output {
    ad::Var features;  // B x d_f
    ad::Var logits;    // B x d_g
  };

  ComponentModel() = default;
  /// head == nullptr creates a private head from the component's seed.
  ComponentModel(std::string name, const BackboneSpec& spec, int num_classes, std::uint64_t seed,
                 MethodTag method, std::shared_ptr<Affine> head = nullptr,
                 ComponentOptions options = {});

  // A copy would silently alias the head; models are moved, never copied.
  ComponentModel(const ComponentModel&) = delete;
  ComponentModel& operator=(const ComponentModel&) = delete;
  ComponentModel(ComponentModel&&) = default;
  ComponentModel& operator=(ComponentModel&&) = default;

  Output forward(ad::Tape& tape, ad::Var x);
  Output forward(ad::Tape& tape, const DomainBatch& batch);
  /// Plain evaluation: {features, logits}.
  std::pair<Matrix, Matrix> evaluate(const Matrix& x);

  /// Backbone and head parameters (the deployable model).
  ParamList params();
  ParamList backbone_params() { return backbone_.params(); }
  ParamList head_params() { return head_->params(); }
  /// Everything its own loss trains: backbone, head, and the private discriminator if any.
  ParamList training_params();

  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }
  MethodTag method() const { return method_; }
  const ComponentOptions& options() const { return options_; }
  Eigen::Index input_dim() const { return backbone_.in_dim(); }
  Eigen::Index feature_dim() const { return backbone_.out_dim(); }
  int num_classes() const { return static_cast<int>(head_->out_dim()); }

  Mlp& backbone() { return backbone_; }
  Affine& head() { return *head_; }
  std::shared_ptr<Affine> shared_head() const { return head_; }
  Discriminator* discriminator() { return disc_ ? &*disc_ : nullptr; }
  const Conditioner& conditioner() const { return conditioner_; }

 private:
  std::string name_;
  std::uint64_t seed_ = 0;
  MethodTag method_ = MethodTag::source_only;
  ComponentOptions options_;
  Mlp backbone_;
  std::shared_ptr<Affine> head_;
  std::optional<Discriminator> disc_;
  Conditioner conditioner_;
};

/// The three pieces of one component's objective. `objective` is what
/// backward() runs on: for cdan_like the adversarial term enters unscaled
/// behind a gradient-reversal of strength transfer_weight, so the
/// discriminator descends it while the backbone ascends it.
struct ComponentLoss {
  ad::Var objective;
  ad::Var ce;
  std::optional<ad::Var> transfer;
  double transfer_weight = 0.0;
  ComponentModel::Output source;
  ComponentModel::Output target;

  /// Reported scalar: ce + transfer_weight * transfer.
  double value() const;
};

ComponentLoss component_loss(ComponentModel& model, ad::Tape& tape, const DomainBatch& source,
                             const DomainBatch& target);

/// Builds n components from seeds/methods; with share_head every component
/// references one head, initialised from the first seed.
std::vector<ComponentModel> make_components(const BackboneSpec& spec, int num_classes,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::vector<MethodTag>& methods,
                                            bool share_head, const ComponentOptions& options = {});

/// Deduplicated parameters of all components (shared head counted once).
ParamList components_params(std::vector<ComponentModel>& comps);
ParamList components_training_params(std::vector<ComponentModel>& comps);

}  // namespace imed
