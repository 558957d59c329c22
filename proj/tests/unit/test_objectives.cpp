#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imed/objectives.hpp"
#include "testing.hpp"

using namespace imed;
using imed::testing::check_param_grads;
using imed::testing::max_abs_diff;
using imed::testing::random_matrix;

namespace {

double scalar_of(const std::function<ad::Var(ad::Tape&)>& f) {
  ad::Tape t;
  return f(t).scalar();
}

// Literal steps (i)-(v) of the minimum-class-confusion loss.
double mcc_oracle(const Matrix& logits, double T) {
  const Eigen::Index B = logits.rows(), C = logits.cols();
  Matrix y(B, C);
  std::vector<double> w(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    double z = 0.0, mx = (logits.row(b) / T).maxCoeff();
    for (Eigen::Index c = 0; c < C; ++c) z += std::exp(logits(b, c) / T - mx);
    double h = 0.0;
    for (Eigen::Index c = 0; c < C; ++c) {
      y(b, c) = std::exp(logits(b, c) / T - mx) / z;
      h -= y(b, c) * std::log(y(b, c));
    }
    w[static_cast<std::size_t>(b)] = 1.0 + std::exp(-h);
  }
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  Matrix conf = Matrix::Zero(C, C);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double wb = static_cast<double>(B) * w[static_cast<std::size_t>(b)] / wsum;
    for (Eigen::Index j = 0; j < C; ++j)
      for (Eigen::Index k = 0; k < C; ++k) conf(j, k) += y(b, j) * wb * y(b, k);
  }
  double loss = 0.0;
  for (Eigen::Index j = 0; j < C; ++j) {
    const double row = conf.row(j).sum();
    for (Eigen::Index k = 0; k < C; ++k)
      if (j != k) loss += conf(j, k) / row;
  }
  return loss / static_cast<double>(C);
}

EnsembleConfig tiny_ensemble() {
  EnsembleConfig c;
  c.n_components = 2;
  c.feature_dim = 4;
  c.num_classes = 2;
  c.groups = 2;
  c.fusion_depth = 1;
  c.endogeny_hidden = 5;
  c.disc_hidden = 6;
  return c;
}

TeacherBatch tiny_batch(std::uint64_t seed) {
  TeacherBatch b;
  for (std::uint64_t i = 0; i < 2; ++i) {
    b.source_features.push_back(random_matrix(4, 4, seed + i));
    b.source_logits.push_back(random_matrix(4, 2, seed + 10 + i));
    b.target_features.push_back(random_matrix(4, 4, seed + 20 + i));
    b.target_logits.push_back(random_matrix(4, 2, seed + 30 + i));
  }
  b.source_labels = {0, 1, 1, 0};
  return b;
}

// 1-D landscape with a sharp minimum at -1 and a wide one at 2.
struct DoubleWell {
  double sharp = 0.1, wide = 1.5;
  double grad(double w) const {
    return (w + 1) / (sharp * sharp) * std::exp(-(w + 1) * (w + 1) / (2 * sharp * sharp)) +
           (w - 2) / (wide * wide) * std::exp(-(w - 2) * (w - 2) / (2 * wide * wide));
  }
  // Basin of attraction under plain gradient descent.
  bool in_wide_basin(double w) const {
    for (int i = 0; i < 20000; ++i) w -= 0.002 * grad(w);
    return w > 0.5;
  }
};

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("source cross-entropy") {
    Matrix confident(2, 3);
    confident << 50, 0, 0, 0, 0, 50;
    ad::Tape t;
    CHECK(loss_ce(t.constant(confident), std::vector<int>{0, 2}).scalar() < 1e-6);
    CHECK(loss_ce(t.constant(Matrix::Zero(4, 10)), std::vector<int>{0, 3, 9, 5}).scalar() ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));
    const Matrix z = random_matrix(5, 4, 1);
    const std::vector<int> y{3, 0, 1, 1, 2};
    double expect = 0.0;
    for (Eigen::Index b = 0; b < 5; ++b) {
      double lse = 0.0;
      for (Eigen::Index c = 0; c < 4; ++c) lse += std::exp(z(b, c));
      expect -= z(b, y[static_cast<std::size_t>(b)]) - std::log(lse);
    }
    CHECK(std::abs(loss_ce(t.constant(z), y).scalar() - expect / 5.0) <= 1e-7);
    CHECK_THROWS(loss_ce(t.constant(z), DomainBatch::target(random_matrix(5, 2, 2))));
  }

  TEST_CASE("discriminator loss") {
    ad::Tape t;
    CHECK(loss_dc(t.constant(Matrix::Zero(3, 1)), t.constant(Matrix::Zero(5, 1))).scalar() ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(loss_dc(t.constant(Matrix::Constant(3, 1, 40)), t.constant(Matrix::Constant(3, 1, -40))).scalar() < 1e-12);
    const Matrix s = random_matrix(4, 1, 3), g = random_matrix(6, 1, 4);
    double expect = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) expect -= std::log(1.0 / (1.0 + std::exp(-s(i, 0)))) / 4.0;
    for (Eigen::Index i = 0; i < 6; ++i) expect -= std::log(1.0 - 1.0 / (1.0 + std::exp(-g(i, 0)))) / 6.0;
    const double got = loss_dc(t.constant(s), t.constant(g)).scalar();
    CHECK(std::abs(got - expect) <= 1e-7);
    CHECK(got >= 0.0);
    CHECK_THROWS_AS(loss_dc(t.constant(Matrix(0, 1)), t.constant(g)), DimensionError);

    Rng rng = make_stream(0, "disc");
    Discriminator d("d", 8, 16, rng);
    const Matrix p = d.probabilities(random_matrix(50, 8, 5, 30.0));
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
  }

  TEST_CASE("minimum class confusion") {
    ad::Tape t;
    Matrix onehot(4, 2);
    onehot << 1000, 0, 0, 1000, 1000, 0, 0, 1000;
    CHECK(loss_mcc(t.constant(onehot), 2.5).scalar() <= 1e-6);
    CHECK(loss_mcc(t.constant(Matrix::Zero(6, 2)), 2.5).scalar() == doctest::Approx(0.5).epsilon(1e-12));
    const Matrix z = random_matrix(7, 4, 6, 2.0);
    CHECK(std::abs(loss_mcc(t.constant(z), 2.5).scalar() - mcc_oracle(z, 2.5)) <= 1e-6);
    CHECK(std::abs(loss_mcc(t.constant(z), 1.0).scalar() - mcc_oracle(z, 1.0)) <= 1e-6);

    // Batch and (simultaneous) class permutations leave the loss unchanged.
    Matrix rows = z.colwise().reverse();
    Matrix cols(7, 4);
    const int perm[4] = {2, 0, 3, 1};
    for (int c = 0; c < 4; ++c) cols.col(c) = z.col(perm[c]);
    const double base = loss_mcc(t.constant(z), 2.5).scalar();
    CHECK(loss_mcc(t.constant(rows), 2.5).scalar() == doctest::Approx(base).epsilon(1e-12));
    CHECK(loss_mcc(t.constant(cols), 2.5).scalar() == doctest::Approx(base).epsilon(1e-12));
    CHECK_THROWS_AS(loss_mcc(t.constant(z), 0.0), ConfigError);

    CHECK(imed::testing::check_input_grads({z}, [](ad::Tape&, auto v) { return loss_mcc(v[0], 2.5); }) < 1e-4);
  }

  TEST_CASE("loss bundle validation") {
    LossBundle ok;
    CHECK_NOTHROW(ok.validate());
    LossBundle bad = ok;
    bad.rho = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.alpha = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.l_ce = NAN;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("teacher gradient routing") {
    EnsembleModel m(tiny_ensemble(), 3);
    const auto batch = tiny_batch(40);
    const double mu1 = 0.7;

    SUBCASE("the reversed domain gradient reaches E and J scaled by -mu1") {
      auto f = [&](ad::Tape& t) { return teacher_terms(m, t, batch, mu1, 2.5).l_dc; };
      auto reversed = [&](ad::Tape& t) { return ad::scale(teacher_terms(m, t, batch, mu1, 2.5).l_dc, -mu1); };
      CHECK(check_param_grads(m.model_params(), f, 1e-5, reversed) < 1e-4);
      CHECK(check_param_grads(m.disc_params(), f) < 1e-4);
    }
    SUBCASE("task terms") {
      auto f = [&](ad::Tape& t) { return teacher_terms(m, t, batch, mu1, 2.5).task; };
      CHECK(check_param_grads(m.model_params(), f) < 1e-4);
      ad::Tape t;
      auto terms = teacher_terms(m, t, batch, mu1, 2.5);
      CHECK(terms.task.scalar() == doctest::Approx(terms.l_ce.scalar() + mu1 * terms.l_c.scalar()));
    }
    SUBCASE("mu1 = 0 leaves pure source cross-entropy") {
      ad::Tape t;
      auto terms = teacher_terms(m, t, batch, 0.0, 2.5);
      CHECK(terms.task.scalar() == terms.l_ce.scalar());
      zero_grads(m.model_params());
      t.backward(terms.l_dc);
      CHECK(grad_norm(m.model_params()) == 0.0);
    }
  }

  TEST_CASE("a discriminator step descends its loss") {
    EnsembleModel m(tiny_ensemble(), 4);
    const auto batch = tiny_batch(50);
    auto l_dc = [&] { return scalar_of([&](ad::Tape& t) { return teacher_terms(m, t, batch, 1.0, 2.5).l_dc; }); };
    const double before = l_dc();
    ad::Tape t;
    auto terms = teacher_terms(m, t, batch, 1.0, 2.5);
    zero_grads(m.disc_params());
    t.backward(terms.l_dc);
    SgdMomentum opt(m.disc_params(), 0.0);
    opt.step(1e-3);
    CHECK(l_dc() < before);
  }

  TEST_CASE("SAM on a quadratic") {
    Parameter w("w", Matrix::Constant(1, 1, 1.0));
    ParamList ps{&w};
    double seen_at = 0.0;
    auto grad = [&] {
      seen_at = w.value(0, 0);
      w.grad(0, 0) += 2.0 * w.value(0, 0);
    };
    SamStats s = sam_gradients(ps, 0.1, grad, grad);
    CHECK(s.grad_norm == doctest::Approx(2.0));
    CHECK(s.eps_norm == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(seen_at == doctest::Approx(1.1));
    CHECK(w.grad(0, 0) == doctest::Approx(2.2));
    CHECK(w.value(0, 0) == 1.0);

    w.grad.setZero();
    s = sam_gradients(ps, 0.1, [] {}, [] {});
    CHECK(s.eps_norm == 0.0);

    auto poisoned = [&] { w.grad(0, 0) = NAN; };
    CHECK_THROWS_AS(sam_gradients(ps, 0.1, poisoned, grad), NonFiniteError);
    CHECK(w.value(0, 0) == 1.0);
    CHECK_THROWS_AS(sam_gradients(ps, -1.0, grad, grad), ConfigError);
  }

  TEST_CASE("SAM second evaluation is the gradient at the perturbed point") {
    EnsembleModel m(tiny_ensemble(), 5);
    const auto batch = tiny_batch(60);
    const ParamList ps = m.model_params();
    auto task = [&](ad::Tape& t) { return teacher_terms(m, t, batch, 1.0, 2.5, false).task; };
    auto backprop = [&] {
      ad::Tape t;
      t.backward(task(t));
    };
    const double rho = 0.05;
    sam_gradients(ps, rho, backprop, backprop);
    std::vector<Matrix> sam;
    for (auto* p : ps) sam.push_back(p->grad);

    // Rebuild the perturbation and difference the loss there.
    zero_grads(ps);
    backprop();
    const double norm = grad_norm(ps);
    std::vector<Matrix> eps;
    for (auto* p : ps) eps.push_back(rho / norm * p->grad);
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value += eps[i];
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Matrix numeric(ps[i]->value.rows(), ps[i]->value.cols());
      for (Eigen::Index k = 0; k < ps[i]->value.size(); ++k) {
        const double keep = ps[i]->value.data()[k];
        ps[i]->value.data()[k] = keep + 1e-5;
        const double up = scalar_of(task);
        ps[i]->value.data()[k] = keep - 1e-5;
        const double down = scalar_of(task);
        ps[i]->value.data()[k] = keep;
        numeric.data()[k] = (up - down) / 2e-5;
      }
      worst = std::max(worst, imed::testing::rel_error(sam[i], numeric));
    }
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value -= eps[i];
    CHECK(worst < 1e-4);
  }

  TEST_CASE("rho = 0 reproduces plain SGD bit for bit") {
    auto run = [](bool sam) {
      EnsembleModel m(tiny_ensemble(), 6);
      SgdMomentum mo(m.model_params()), dopt(m.disc_params());
      TeacherStepOptions o;
      o.rho = 0.0;
      o.use_sam = sam;
      std::vector<double> trace;
      for (std::uint64_t s = 0; s < 5; ++s) {
        auto st = teacher_step(m, tiny_batch(70 + s), mo, dopt, 0.01, o);
        trace.push_back(st.l_ce);
        trace.push_back(st.l_dc);
        trace.push_back(st.l_c);
      }
      for (auto* p : m.model_params()) trace.insert(trace.end(), p->value.data(), p->value.data() + p->value.size());
      return trace;
    };
    CHECK(run(true) == run(false));
  }

  TEST_CASE("teacher steps keep the perturbation on the rho sphere") {
    EnsembleModel m(tiny_ensemble(), 7);
    SgdMomentum mo(m.model_params()), dopt(m.disc_params());
    TeacherStepOptions o;
    o.rho = 0.03;
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto st = teacher_step(m, tiny_batch(80 + s), mo, dopt, 0.01, o);
      REQUIRE(st.grad_norm > 0.0);
      CHECK(std::abs(st.eps_norm - o.rho) <= 1e-8);
    }
  }

  TEST_CASE("gradient clipping caps the joint norm") {
    Parameter a("a", Matrix::Zero(1, 2)), b("b", Matrix::Zero(2, 1));
    a.grad << 3, 0;
    b.grad << 0, 4;
    ParamList ps{&a, &b};
    CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
    CHECK(grad_norm(ps) == doctest::Approx(1.0));
    CHECK(clip_grad_norm(ps, 0.0) == doctest::Approx(1.0));
    CHECK(grad_norm(ps) == doctest::Approx(1.0));
  }

  TEST_CASE("adversarial warm-up") {
    CHECK(grl_warmup(0.0) == 0.0);
    CHECK(grl_warmup(1.0) > 0.9999);
    CHECK(grl_warmup(0.3) < grl_warmup(0.6));
  }

  TEST_CASE("SAM leaves a minimum narrower than rho") {
    const DoubleWell well;
    auto run = [&](double w0, double rho) {
      Parameter w("w", Matrix::Constant(1, 1, w0));
      ParamList ps{&w};
      SgdMomentum opt(ps, 0.0);
      auto g = [&] { w.grad(0, 0) += well.grad(w.value(0, 0)); };
      for (int step = 0; step < 1000; ++step) {
        sam_gradients(ps, rho, g, g);
        opt.step(0.02);
      }
      return w.value(0, 0);
    };
    CHECK_FALSE(well.in_wide_basin(run(-0.99, 0.0)));
    CHECK(well.in_wide_basin(run(-0.99, 0.5)));

    Rng rng = make_stream(3, "double-well");
    std::uniform_real_distribution<double> start(-2.0, 3.0);
    int sgd = 0, sam = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const double w0 = start(rng);
      sgd += well.in_wide_basin(run(w0, 0.0));
      sam += well.in_wide_basin(run(w0, 0.5));
    }
    MESSAGE("wide-basin runs: sgd " << sgd << "/60, sam " << sam << "/60");
    CHECK(sam > sgd);
  }
}
