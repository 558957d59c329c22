#pragma once

// Teacher-phase objective: min over (E, J), max over D of
//   L_CE + mu1 * (L_C - L_DC)
// realised with gradient reversal on D's input, and the (E, J) update taken
// with sharpness-aware minimization on the task terms L_CE + mu1 * L_C.

#include <functional>
#include <vector>

#include "imed/ensemble_core.hpp"
#include "imed/losses.hpp"

namespace imed {

inline constexpr double kDefaultMomentum = 0.9;
inline constexpr double kDefaultRho = 0.02;
inline constexpr double kDefaultMccTemperature = 2.5;

/// Named scalar losses and the factors that weigh them.
struct LossBundle {
  double l_ce = 0.0;
  double l_dc = 0.0;
  double l_c = 0.0;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double mu3 = 1.0;
  double rho = kDefaultRho;
  double alpha = 1.0;

  /// Throws ConfigError on non-finite values, rho < 0 or alpha < 1.
  void validate() const;
};

/// SGD with heavy-ball momentum: v <- m v + g; p <- p - lr v.
class SgdMomentum {
 public:
  SgdMomentum() = default;
  SgdMomentum(ParamList params, double momentum = kDefaultMomentum);

  void step(double lr);
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  std::vector<Matrix> velocity_;
  double momentum_ = kDefaultMomentum;
};

struct SamStats {
  double grad_norm = 0.0;  // ||g|| of the first evaluation
  double eps_norm = 0.0;   // ||eps_hat|| actually applied
};

/// Two-evaluation SAM gradient.
///   1. zero grads, first_grad() fills grads with g = grad task(theta)
///   2. eps = rho g/||g|| (0 when ||g|| = 0); theta += eps
///   3. zero grads, second_grad() fills grads at theta + eps
///   4. theta restored bit-exactly
/// On return the grads hold the second evaluation, ready for the base optimizer.
/// Throws NonFiniteError (parameters untouched) if g is not finite.
SamStats sam_gradients(const ParamList& params, double rho, const std::function<void()>& first_grad,
                       const std::function<void()>& second_grad);

/// Convenience: sam_gradients followed by a base-optimizer step.
SamStats sam_step(SgdMomentum& opt, double lr, double rho, const std::function<void()>& task_grad);

/// Component outputs for one source/target batch pair, fed to the ensemble as constants.
struct TeacherBatch {
  std::vector<Matrix> source_features;
  std::vector<Matrix> source_logits;
  std::vector<Matrix> target_features;
  std::vector<Matrix> target_logits;
  std::vector<int> source_labels;
};

struct TeacherTerms {
  ad::Var l_ce;
  ad::Var l_c;
  ad::Var l_dc;  // D's input passes through grad_reverse(mu1)
  ad::Var task;  // l_ce + mu1 * l_c
  EnsembleModel::Vars source;
  EnsembleModel::Vars target;
};

/// Records every teacher loss on `tape`. Backward from `task` gives the task
/// gradient for (E, J); backward from `l_dc` gives d L_DC / d theta_D and
/// -mu1 * grl_scale * d L_DC / d theta_(E,J). Without with_domain, l_dc is left unset.
TeacherTerms teacher_terms(EnsembleModel& model, ad::Tape& tape, const TeacherBatch& batch,
                           double mu1, double mcc_temperature, bool with_domain = true,
                           double grl_scale = 1.0);

/// Adversarial warm-up 2 / (1 + exp(-10 p)) - 1: 0 at p = 0, approaching 1.
double grl_warmup(double p);

struct TeacherStepOptions {
  double mu1 = 1.0;
  double rho = kDefaultRho;
  double mcc_temperature = kDefaultMccTemperature;
  /// false: plain gradient step on the same objective (no perturbation pass).
  bool use_sam = true;
  /// Multiplies the gradient-reversal strength mu1 (adversarial warm-up).
  double grl_scale = 1.0;
  /// Joint gradient-norm cap applied separately to (E, J) and D; 0 disables.
  double clip_norm = 0.0;
};

struct TeacherStepStats {
  double l_ce = 0.0;
  double l_dc = 0.0;
  double l_c = 0.0;
  double grad_norm = 0.0;
  double eps_norm = 0.0;
};

/// One teacher iteration: (E, J) by SAM on the task terms plus the reversed
/// domain gradient at unperturbed parameters, D by a plain step on L_DC.
TeacherStepStats teacher_step(EnsembleModel& model, const TeacherBatch& batch,
                              SgdMomentum& model_opt, SgdMomentum& disc_opt, double lr,
                              const TeacherStepOptions& opts);

}  // namespace imed
