#include "imed/component_zoo.hpp"

namespace imed {

std::string_view to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::source_only:
      return "source_only";
    case MethodTag::jan_like:
      return "jan_like";
    case MethodTag::cdan_like:
      return "cdan_like";
  }
  return "source_only";
}

MethodTag parse_method_tag(std::string_view s) {
  if (s == "source_only") return MethodTag::source_only;
  if (s == "jan_like") return MethodTag::jan_like;
  if (s == "cdan_like") return MethodTag::cdan_like;
  throw ConfigError("unknown component method '" + std::string(s) +
                    "' (expected source_only, jan_like or cdan_like)");
}

std::vector<Eigen::Index> BackboneSpec::widths() const {
  std::vector<Eigen::Index> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(feature_dim);
  return w;
}

ComponentModel::ComponentModel(std::string name, const BackboneSpec& spec, int num_classes,
                               std::uint64_t seed, MethodTag method, std::shared_ptr<Affine> head,
                               ComponentOptions options)
    : name_(std::move(name)), seed_(seed), method_(method), options_(options) {
  if (num_classes < 2) throw ConfigError(name_ + ": need at least two classes");
  Rng backbone_rng = make_stream(seed, "component-backbone");
  backbone_ = Mlp(name_ + ".backbone", spec.widths(), backbone_rng);
  if (head) {
    if (head->in_dim() != spec.feature_dim || head->out_dim() != num_classes) {
      throw DimensionError(name_ + ": shared head shape does not match d_f x |C|");
    }
    head_ = std::move(head);
  } else {
    Rng head_rng = make_stream(seed, "component-head");
    head_ = std::make_shared<Affine>(name_ + ".head", spec.feature_dim, num_classes, head_rng);
  }
  conditioner_ = Conditioner(spec.feature_dim, num_classes, seed, options.proj_dim);
  if (method_ == MethodTag::cdan_like) {
    Rng disc_rng = make_stream(seed, "component-disc");
    disc_.emplace(name_ + ".disc", conditioner_.width(), options.disc_hidden, disc_rng);
  }
}

ComponentModel::Output ComponentModel::forward(ad::Tape& tape, ad::Var x) {
  if (x.cols() != backbone_.in_dim()) {
    throw DimensionError("component '" + name_ + "': input width " + std::to_string(x.cols()) +
                         " does not match backbone input " + std::to_string(backbone_.in_dim()));
  }
  ad::Var f = backbone_.forward(tape, x);
  ad::Var g = head_->forward(tape, f);
  return {f, g};
}

ComponentModel::Output ComponentModel::forward(ad::Tape& tape, const DomainBatch& batch) {
  return forward(tape, tape.constant(batch.inputs()));
}

std::pair<Matrix, Matrix> ComponentModel::evaluate(const Matrix& x) {
  ad::Tape tape;
  auto out = forward(tape, tape.constant(x));
  return {out.features.value(), out.logits.value()};
}

ParamList ComponentModel::params() {
  ParamList p = backbone_.params();
  for (auto* h : head_->params()) p.push_back(h);
  return p;
}

ParamList ComponentModel::training_params() {
  ParamList p = params();
  if (disc_) {
    for (auto* d : disc_->params()) p.push_back(d);
  }
  return p;
}

double ComponentLoss::value() const {
  double v = ce.scalar();
  if (transfer) v += transfer_weight * transfer->scalar();
  return v;
}

ComponentLoss component_loss(ComponentModel& model, ad::Tape& tape, const DomainBatch& source,
                             const DomainBatch& target) {
  const auto& labels = source.require_labels("component_loss");
  auto src = model.forward(tape, source);
  auto tgt = model.forward(tape, target);
  ComponentLoss out;
  out.source = src;
  out.target = tgt;
  out.ce = loss_ce(src.logits, labels);
  out.objective = out.ce;
  const double lambda = model.options().transfer_weight;
  switch (model.method()) {
    case MethodTag::source_only:
      break;
    case MethodTag::jan_like: {
      ad::Var mmd = mmd_gaussian(src.features, tgt.features);
      out.transfer = mmd;
      out.transfer_weight = lambda;
      out.objective = ad::add(out.ce, ad::scale(mmd, lambda));
      break;
    }
    case MethodTag::cdan_like: {
      auto cond_of = [&](const ComponentModel::Output& o) {
        ad::Var g = model.options().raw_logit_conditioning ? o.logits : ad::softmax_rows(o.logits);
        return ad::grad_reverse(model.conditioner().apply(o.features, g), lambda);
      };
      ad::Var dc = loss_dc(*model.discriminator(), cond_of(src), cond_of(tgt));
      out.transfer = dc;
      out.transfer_weight = lambda;
      out.objective = ad::add(out.ce, dc);
      break;
    }
  }
  return out;
}

std::vector<ComponentModel> make_components(const BackboneSpec& spec, int num_classes,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::vector<MethodTag>& methods,
                                            bool share_head, const ComponentOptions& options) {
  if (seeds.empty()) throw ConfigError("make_components: at least one seed is required");
  if (methods.size() != seeds.size() && methods.size() != 1) {
    throw ConfigError("make_components: methods must list one tag or one per seed");
  }
  std::shared_ptr<Affine> head;
  if (share_head) {
    Rng head_rng = make_stream(seeds.front(), "component-head");
    head = std::make_shared<Affine>("shared.head", spec.feature_dim, num_classes, head_rng);
  }
  std::vector<ComponentModel> comps;
  comps.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const MethodTag m = methods.size() == 1 ? methods.front() : methods[i];
    comps.emplace_back("component" + std::to_string(i), spec, num_classes, seeds[i], m, head,
                       options);
  }
  return comps;
}

ParamList components_params(std::vector<ComponentModel>& comps) {
  ParamList all;
  for (auto& c : comps)
    for (auto* p : c.params()) all.push_back(p);
  return unique_params(all);
}

ParamList components_training_params(std::vector<ComponentModel>& comps) {
  ParamList all;
  for (auto& c : comps)
    for (auto* p : c.training_params()) all.push_back(p);
  return unique_params(all);
}

}  // namespace imed
