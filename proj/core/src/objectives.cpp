#include "imed/objectives.hpp"

#include <cmath>
#include <string>

namespace imed {

void LossBundle::validate() const {
  for (double v : {l_ce, l_dc, l_c, mu1, mu2, mu3, rho, alpha}) {
    if (!std::isfinite(v)) throw ConfigError("LossBundle: non-finite value");
  }
  if (rho < 0.0) throw ConfigError("LossBundle: rho must be >= 0");
  if (alpha < 1.0) throw ConfigError("LossBundle: alpha must be >= 1");
}

SgdMomentum::SgdMomentum(ParamList params, double momentum)
    : params_(unique_params(params)), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (auto* p : params_) velocity_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
}

void SgdMomentum::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) continue;
    velocity_[i] = momentum_ * velocity_[i] + p->grad;
    p->value -= lr * velocity_[i];
  }
}

SamStats sam_gradients(const ParamList& params, double rho, const std::function<void()>& first_grad,
                       const std::function<void()>& second_grad) {
  if (rho < 0.0) throw ConfigError("sam: rho must be >= 0");
  zero_grads(params);
  first_grad();
  SamStats stats;
  stats.grad_norm = grad_norm(params);
  if (!std::isfinite(stats.grad_norm)) {
    throw NonFiniteError("sam: non-finite gradient norm; step aborted");
  }

  std::vector<Matrix> saved;
  saved.reserve(params.size());
  for (auto* p : params) saved.push_back(p->value);

  double eps_sq = 0.0;
  if (stats.grad_norm > 0.0 && rho > 0.0) {
    const double s = rho / stats.grad_norm;
    for (auto* p : params) {
      Matrix eps = s * p->grad;
      eps_sq += eps.squaredNorm();
      p->value += eps;
    }
  }
  stats.eps_norm = std::sqrt(eps_sq);

  zero_grads(params);
  second_grad();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = saved[i];
  return stats;
}

SamStats sam_step(SgdMomentum& opt, double lr, double rho, const std::function<void()>& task_grad) {
  SamStats stats = sam_gradients(opt.params(), rho, task_grad, task_grad);
  opt.step(lr);
  return stats;
}

TeacherTerms teacher_terms(EnsembleModel& model, ad::Tape& tape, const TeacherBatch& batch,
                           double mu1, double mcc_temperature, bool with_domain,
                           double grl_scale) {
  auto consts = [&tape](const std::vector<Matrix>& ms) {
    std::vector<ad::Var> out;
    out.reserve(ms.size());
    for (const auto& m : ms) out.push_back(tape.constant(m));
    return out;
  };
  const auto sf = consts(batch.source_features), sg = consts(batch.source_logits);
  const auto tf = consts(batch.target_features), tg = consts(batch.target_logits);

  TeacherTerms t;
  t.source = model.forward(tape, sf, sg);
  t.target = model.forward(tape, tf, tg);
  t.l_ce = loss_ce(t.source.logits, batch.source_labels);
  t.l_c = loss_mcc(t.target.logits, mcc_temperature);
  t.task = ad::add(t.l_ce, ad::scale(t.l_c, mu1));
  if (!with_domain) return t;
  ad::Var cs = ad::grad_reverse(model.discriminator_input(t.source.feature, t.source.logits), mu1 * grl_scale);
  ad::Var ct = ad::grad_reverse(model.discriminator_input(t.target.feature, t.target.logits), mu1 * grl_scale);
  t.l_dc = loss_dc(model.discriminator(), cs, ct);
  return t;
}

double grl_warmup(double p) { return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0; }

TeacherStepStats teacher_step(EnsembleModel& model, const TeacherBatch& batch,
                              SgdMomentum& model_opt, SgdMomentum& disc_opt, double lr,
                              const TeacherStepOptions& opts) {
  const ParamList& mparams = model_opt.params();
  const ParamList& dparams = disc_opt.params();

  ad::Tape tape;
  TeacherTerms terms =
      teacher_terms(model, tape, batch, opts.mu1, opts.mcc_temperature, true, opts.grl_scale);
  TeacherStepStats stats;
  stats.l_ce = terms.l_ce.scalar();
  stats.l_c = terms.l_c.scalar();
  stats.l_dc = terms.l_dc.scalar();
  if (!std::isfinite(stats.l_ce) || !std::isfinite(stats.l_c) || !std::isfinite(stats.l_dc)) {
    throw NonFiniteError("teacher step: non-finite loss (l_ce=" + std::to_string(stats.l_ce) +
                         ", l_c=" + std::to_string(stats.l_c) + ", l_dc=" +
                         std::to_string(stats.l_dc) + ")");
  }

  // Domain term at unperturbed parameters: D descends, (E, J) get the reversed share.
  zero_grads(mparams);
  zero_grads(dparams);
  tape.backward(terms.l_dc);
  std::vector<Matrix> reversed;
  reversed.reserve(mparams.size());
  for (auto* p : mparams) reversed.push_back(p->grad);

  auto first = [&] { tape.backward(terms.task); };
  if (opts.use_sam) {
    auto second = [&] {
      ad::Tape perturbed;
      TeacherTerms pt =
          teacher_terms(model, perturbed, batch, opts.mu1, opts.mcc_temperature, /*with_domain=*/false);
      perturbed.backward(pt.task);
    };
    SamStats s = sam_gradients(mparams, opts.rho, first, second);
    stats.grad_norm = s.grad_norm;
    stats.eps_norm = s.eps_norm;
  } else {
    zero_grads(mparams);
    first();
    stats.grad_norm = grad_norm(mparams);
    if (!std::isfinite(stats.grad_norm)) throw NonFiniteError("teacher step: non-finite gradient");
  }
  for (std::size_t i = 0; i < mparams.size(); ++i) mparams[i]->grad += reversed[i];
  clip_grad_norm(mparams, opts.clip_norm);
  clip_grad_norm(dparams, opts.clip_norm);

  model_opt.step(lr);
  disc_opt.step(lr);
  return stats;
}

}  // namespace imed
