#include "imed/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imed {

Discriminator::Discriminator(const std::string& name, Eigen::Index in_dim, Eigen::Index hidden,
                             Rng& rng)
    : net_(name, {in_dim, hidden, hidden, 1}, rng) {}

ad::Var Discriminator::logits(ad::Tape& tape, ad::Var cond) { return net_.forward(tape, cond); }

Matrix Discriminator::probabilities(const Matrix& cond) {
  ad::Tape tape;
  // Saturated logits round to exactly 0 or 1 in double; keep the open interval.
  const double lo = std::numeric_limits<double>::min(), hi = std::nextafter(1.0, 0.0);
  return ad::sigmoid(logits(tape, tape.constant(cond))).value().cwiseMax(lo).cwiseMin(hi);
}

ad::Var loss_ce(ad::Var logits, const DomainBatch& batch) {
  return loss_ce(logits, batch.require_labels("loss_ce"));
}

ad::Var loss_ce(ad::Var logits, const std::vector<int>& labels) {
  return ad::cross_entropy(logits, labels);
}

ad::Var loss_dc(ad::Var source_logits, ad::Var target_logits) {
  if (source_logits.rows() == 0 || target_logits.rows() == 0) {
    throw DimensionError("loss_dc: both domains must be present in the step");
  }
  return ad::add(ad::mean(ad::softplus(ad::neg(source_logits))),
                 ad::mean(ad::softplus(target_logits)));
}

ad::Var loss_dc(Discriminator& disc, ad::Var source_cond, ad::Var target_cond) {
  ad::Tape& t = *source_cond.tape;
  return loss_dc(disc.logits(t, source_cond), disc.logits(t, target_cond));
}

ad::Var loss_mcc(ad::Var target_logits, double temperature) {
  using namespace ad;
  if (temperature <= 0.0) throw ConfigError("loss_mcc: temperature must be positive");
  const auto batch = static_cast<double>(target_logits.rows());
  const auto classes = static_cast<double>(target_logits.cols());
  Var probs = softmax_rows(scale(target_logits, 1.0 / temperature));
  // Entropy from log-softmax keeps log(0) out of the graph.
  Var logp = log_softmax_rows(scale(target_logits, 1.0 / temperature));
  Var entropy = neg(sum_rows(mul(probs, logp)));                 // B x 1
  Var w = add_scalar(exp(neg(entropy)), 1.0);                     // 1 + e^{-H}
  Var weights = scale(div(w, sum(w)), batch);                     // sums to B
  Var conf = matmul(transpose(mul(probs, weights)), probs);       // |C| x |C|
  Var conf_norm = div(conf, sum_rows(conf));
  return scale(sub(sum(conf_norm), trace(conf_norm)), 1.0 / classes);
}

double median_pairwise_distance(const Matrix& pooled) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

ad::Var mmd_gaussian(ad::Var a, ad::Var b) {
  using namespace ad;
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a.value(), b.value();
  return mmd_gaussian(a, b, median_pairwise_distance(pooled));
}

ad::Var mmd_gaussian(ad::Var a, ad::Var b, double sigma) {
  using namespace ad;
  if (!(sigma > 0.0)) throw ConfigError("mmd_gaussian: bandwidth must be positive");
  const double gamma = -1.0 / (2.0 * sigma * sigma);
  Var kss = exp(scale(pairwise_sqdist(a, a), gamma));
  Var ktt = exp(scale(pairwise_sqdist(b, b), gamma));
  Var kst = exp(scale(pairwise_sqdist(a, b), gamma));
  return sub(add(mean(kss), mean(ktt)), scale(mean(kst), 2.0));
}

}  // namespace imed
