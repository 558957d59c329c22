#include "imed/distillation.hpp"

#include <cmath>
#include <string>

namespace imed {

std::string_view to_string(FeatureKdMode mode) {
  return mode == FeatureKdMode::softmax ? "softmax" : "mse";
}

FeatureKdMode parse_feature_kd_mode(std::string_view s) {
  if (s == "softmax") return FeatureKdMode::softmax;
  if (s == "mse") return FeatureKdMode::mse;
  throw ConfigError("unknown feature KD mode '" + std::string(s) + "' (expected softmax or mse)");
}

StudentModel::StudentModel(const BackboneSpec& spec, int num_classes, std::uint64_t seed) {
  Rng rng = make_stream(seed, "student-backbone");
  backbone_ = Mlp("student.backbone", spec.widths(), rng);
  Rng head_rng = make_stream(seed, "student-head");
  head_ = Affine("student.head", spec.feature_dim, num_classes, head_rng);
}

ComponentModel::Output StudentModel::forward(ad::Tape& tape, ad::Var x) {
  ad::Var f = backbone_.forward(tape, x);
  return {f, head_.forward(tape, f)};
}

std::pair<Matrix, Matrix> StudentModel::evaluate(const Matrix& x) {
  ad::Tape tape;
  auto out = forward(tape, tape.constant(x));
  return {out.features.value(), out.logits.value()};
}

ParamList StudentModel::params() {
  ParamList p = backbone_.params();
  for (auto* h : head_.params()) p.push_back(h);
  return p;
}

namespace {

Matrix softened(const Matrix& m, double alpha) {
  ad::Tape t;
  return ad::softmax_rows(t.constant(m / alpha)).value();
}

double mean_entropy(const Matrix& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = p.data()[i];
    if (v > 0.0) h -= v * std::log(v);
  }
  return h / static_cast<double>(p.rows());
}

void check_shape(const Matrix& teacher, ad::Var student, const char* what) {
  if (teacher.rows() != student.rows() || teacher.cols() != student.cols()) {
    throw DimensionError(std::string("kd_loss: teacher/student ") + what + " shapes differ (" +
                         std::to_string(teacher.rows()) + "x" + std::to_string(teacher.cols()) +
                         " vs " + std::to_string(student.rows()) + "x" +
                         std::to_string(student.cols()) + ")");
  }
}

}  // namespace

ad::Var kd_term(const Matrix& teacher, ad::Var student, double alpha) {
  if (alpha < 1.0) throw ConfigError("kd: temperature alpha must be >= 1");
  ad::Tape& t = *student.tape;
  ad::Var target = t.constant(softened(teacher, alpha));
  return ad::scale(ad::soft_cross_entropy(target, ad::scale(student, 1.0 / alpha)), alpha * alpha);
}

ad::Var kd_loss(const TeacherView& teacher_source, const TeacherView& teacher_target,
                const ComponentModel::Output& student_source,
                const ComponentModel::Output& student_target, double alpha, double mu2,
                FeatureKdMode mode) {
  check_shape(teacher_source.logits, student_source.logits, "source logits");
  check_shape(teacher_target.logits, student_target.logits, "target logits");
  check_shape(teacher_source.feature, student_source.features, "source feature");
  check_shape(teacher_target.feature, student_target.features, "target feature");
  ad::Var loss = ad::add(kd_term(teacher_source.logits, student_source.logits, alpha),
                         kd_term(teacher_target.logits, student_target.logits, alpha));
  if (mu2 == 0.0) return loss;
  ad::Tape& t = *student_source.logits.tape;
  auto feature_term = [&](const Matrix& teacher, ad::Var student) {
    if (mode == FeatureKdMode::softmax) return kd_term(teacher, student, alpha);
    ad::Var diff = ad::sub(student, t.constant(teacher));
    return ad::scale(ad::sum(ad::mul(diff, diff)), 1.0 / static_cast<double>(diff.rows()));
  };
  ad::Var feat = ad::add(feature_term(teacher_source.feature, student_source.features),
                         feature_term(teacher_target.feature, student_target.features));
  return ad::add(loss, ad::scale(feat, mu2));
}

ad::Var student_ce(ad::Var student_logits, const DomainBatch& source) {
  return loss_ce(student_logits, source.require_labels("student_ce"));
}

double student_total(double kd, double ce, double mu3) { return kd + mu3 * ce; }

ad::Var student_total(ad::Var kd, ad::Var ce, double mu3) { return ad::add(kd, ad::scale(ce, mu3)); }

double kd_entropy_floor(const TeacherView& teacher_source, const TeacherView& teacher_target,
                        double alpha, double mu2) {
  const double a2 = alpha * alpha;
  double floor = a2 * (mean_entropy(softened(teacher_source.logits, alpha)) +
                       mean_entropy(softened(teacher_target.logits, alpha)));
  floor += mu2 * a2 *
           (mean_entropy(softened(teacher_source.feature, alpha)) +
            mean_entropy(softened(teacher_target.feature, alpha)));
  return floor;
}

}  // namespace imed
