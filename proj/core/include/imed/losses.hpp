#pragma once

#include <vector>

#include "imed/data.hpp"
#include "imed/layers.hpp"

namespace imed {

/// Domain classifier on a conditioning vector. Emits a logit; the domain
/// probability is sigmoid(logit), strictly inside (0, 1).
class Discriminator {
 public:
  Discriminator() = default;
  /// Two hidden ReLU layers of the given width, scalar output.
  Discriminator(const std::string& name, Eigen::Index in_dim, Eigen::Index hidden, Rng& rng);

  ad::Var logits(ad::Tape& tape, ad::Var cond);
  Matrix probabilities(const Matrix& cond);

  Eigen::Index in_dim() const { return net_.in_dim(); }
  ParamList params() { return net_.params(); }
  Mlp& net() { return net_; }

 private:
  Mlp net_;
};

/// Mean cross-entropy of softmax(logits) against the batch labels.
ad::Var loss_ce(ad::Var logits, const DomainBatch& batch);
ad::Var loss_ce(ad::Var logits, const std::vector<int>& labels);

/// -E_s log D - E_t log(1 - D), from discriminator logits.
ad::Var loss_dc(ad::Var source_logits, ad::Var target_logits);
ad::Var loss_dc(Discriminator& disc, ad::Var source_cond, ad::Var target_cond);

/// Minimum class confusion on target logits at temperature T:
/// softmax(logits/T), entropy weights B(1+e^{-H})/sum, C = Y^T diag(w) Y,
/// row-normalised, off-diagonal mass divided by |C|.
ad::Var loss_mcc(ad::Var target_logits, double temperature);

/// Biased Gaussian-kernel MMD^2 with bandwidth = median pairwise distance of
/// the pooled sample (treated as a constant).
ad::Var mmd_gaussian(ad::Var a, ad::Var b);
/// Same estimate at a fixed bandwidth.
ad::Var mmd_gaussian(ad::Var a, ad::Var b, double sigma);
double median_pairwise_distance(const Matrix& pooled);

}  // namespace imed
