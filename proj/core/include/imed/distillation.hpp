#pragma once

// Compact student H = H2 ∘ H1 distilled from the frozen ensemble teacher:
//   L_stu = L_KD + mu3 * L_CE_stu
// where L_KD sums alpha^2-scaled cross-entropies between temperature-softened
// teacher and student outputs: logits on source and target, plus
// mu2-weighted feature terms on source and target.

#include <string_view>

#include "imed/component_zoo.hpp"

namespace imed {

/// How the feature terms of L_KD compare teacher and student features.
///   softmax: cross-entropy between softmax(f/alpha) distributions (default)
///   mse:     mean squared error between the raw features
enum class FeatureKdMode { softmax, mse };

std::string_view to_string(FeatureKdMode mode);
FeatureKdMode parse_feature_kd_mode(std::string_view s);

class StudentModel {
 public:
  StudentModel() = default;
  /// H1 has the component backbone architecture; H2 is affine d_f -> |C|.
  StudentModel(const BackboneSpec& spec, int num_classes, std::uint64_t seed);

  ComponentModel::Output forward(ad::Tape& tape, ad::Var x);
  std::pair<Matrix, Matrix> evaluate(const Matrix& x);

  ParamList params();
  Mlp& backbone() { return backbone_; }
  Affine& head() { return head_; }
  Eigen::Index feature_dim() const { return backbone_.out_dim(); }

 private:
  Mlp backbone_;
  Affine head_;
};

/// Teacher outputs for one batch; always constants.
struct TeacherView {
  Matrix feature;
  Matrix logits;
};

/// alpha^2 * E[ -sum softmax(teacher/alpha) log softmax(student/alpha) ].
ad::Var kd_term(const Matrix& teacher, ad::Var student, double alpha);

ad::Var kd_loss(const TeacherView& teacher_source, const TeacherView& teacher_target,
                const ComponentModel::Output& student_source,
                const ComponentModel::Output& student_target, double alpha, double mu2,
                FeatureKdMode mode = FeatureKdMode::softmax);

ad::Var student_ce(ad::Var student_logits, const DomainBatch& source);

double student_total(double kd, double ce, double mu3);
ad::Var student_total(ad::Var kd, ad::Var ce, double mu3);

/// Lower bound of kd_loss over students: alpha^2 times the teacher entropies of
/// every softmax term (attained iff the student matches the teacher).
double kd_entropy_floor(const TeacherView& teacher_source, const TeacherView& teacher_target,
                        double alpha, double mu2);

}  // namespace imed
