#include "imed/autodiff.hpp"

#include <cmath>
#include <string>

namespace imed::ad {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, true, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{{}, {}, &p, true, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Matrix Tape::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (value(root).size() != 1) {
    throw DimensionError("backward() root must be a 1x1 scalar");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad, *this);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->grad = n.grad;
      } else {
        n.param->grad += n.grad;
      }
    }
  }
}

namespace {

enum class Bcast { Same, Scalar, Col, Row };

Bcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::Scalar;
  if (b.rows() == a.rows() && b.cols() == 1) return Bcast::Col;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::Row;
  throw DimensionError(std::string(op) + ": cannot broadcast " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()) + " onto " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()));
}

Matrix expand(const Matrix& b, Bcast k, Eigen::Index rows, Eigen::Index cols) {
  switch (k) {
    case Bcast::Same:
      return b;
    case Bcast::Scalar:
      return Matrix::Constant(rows, cols, b(0, 0));
    case Bcast::Col:
      return b.replicate(1, cols);
    case Bcast::Row:
      return b.replicate(rows, 1);
  }
  return b;
}

Matrix reduce_to(const Matrix& g, Bcast k) {
  switch (k) {
    case Bcast::Same:
      return g;
    case Bcast::Scalar:
      return Matrix::Constant(1, 1, g.sum());
    case Bcast::Col:
      return g.rowwise().sum();
    case Bcast::Row:
      return g.colwise().sum();
  }
  return g;
}

Matrix softmax_of(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      out(r, c) = std::exp(a(r, c) - m);
      z += out(r, c);
    }
    out.row(r) /= z;
  }
  return out;
}

Matrix log_softmax_of(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) z += std::exp(a(r, c) - m);
    const double lz = m + std::log(z);
    for (Eigen::Index c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) - lz;
  }
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  const auto k = broadcast_kind(a.value(), b.value(), "add");
  Matrix out = a.value() + expand(b.value(), k, a.rows(), a.cols());
  return a.tape->record(std::move(out), {a, b}, [a, b, k](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, reduce_to(g, k));
  });
}

Var sub(Var a, Var b) {
  const auto k = broadcast_kind(a.value(), b.value(), "sub");
  Matrix out = a.value() - expand(b.value(), k, a.rows(), a.cols());
  return a.tape->record(std::move(out), {a, b}, [a, b, k](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, -reduce_to(g, k));
  });
}

Var mul(Var a, Var b) {
  const auto k = broadcast_kind(a.value(), b.value(), "mul");
  Matrix bx = expand(b.value(), k, a.rows(), a.cols());
  Matrix out = a.value().cwiseProduct(bx);
  return a.tape->record(std::move(out), {a, b}, [a, b, k, bx](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(bx));
    if (t.requires_grad(b)) t.accumulate(b, reduce_to(g.cwiseProduct(a.value()), k));
  });
}

Var div(Var a, Var b) {
  const auto k = broadcast_kind(a.value(), b.value(), "div");
  Matrix bx = expand(b.value(), k, a.rows(), a.cols());
  Matrix out = a.value().cwiseQuotient(bx);
  return a.tape->record(std::move(out), {a, b}, [a, b, k, bx](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseQuotient(bx));
    if (t.requires_grad(b)) {
      Matrix gb = -g.cwiseProduct(a.value()).cwiseQuotient(bx.cwiseProduct(bx));
      t.accumulate(b, reduce_to(gb, k));
    }
  });
}

Var scale(Var a, double s) {
  return a.tape->record(a.value() * s, {a},
                        [a, s](const Matrix& g, Tape& t) { t.accumulate(a, g * s); });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return a.tape->record(std::move(out), {a},
                        [a](const Matrix& g, Tape& t) { t.accumulate(a, g); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape->record(std::move(out), {a},
                        [a](const Matrix& g, Tape& t) { t.accumulate(a, g.transpose()); });
}

Var affine(Var x, Var w, Var b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw DimensionError("affine: input width " + std::to_string(x.cols()) + " vs weight " +
                         std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  }
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape->record(std::move(out), {x, w, b}, [x, w, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(x)) t.accumulate(x, g * w.value().transpose());
    if (t.requires_grad(w)) t.accumulate(w, x.value().transpose() * g);
    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  Matrix s = out;
  return a.tape->record(std::move(out), {a}, [a, s](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
  });
}

Var softplus(Var a) {
  Matrix out = a.value().unaryExpr(
      [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
  return a.tape->record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    Matrix s = a.value().unaryExpr([](double v) {
      return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    t.accumulate(a, g.cwiseProduct(s));
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp();
  Matrix e = out;
  return a.tape->record(std::move(out), {a},
                        [a, e](const Matrix& g, Tape& t) { t.accumulate(a, g.cwiseProduct(e)); });
}

Var log(Var a) {
  Matrix out = a.value().array().log();
  return a.tape->record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var sum(Var a) {
  return a.tape->record(Matrix::Constant(1, 1, a.value().sum()), {a},
                        [a](const Matrix& g, Tape& t) {
                          t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                        });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return a.tape->record(Matrix::Constant(1, 1, a.value().sum() / n), {a},
                        [a, n](const Matrix& g, Tape& t) {
                          t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
                        });
}

Var sum_rows(Var a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape->record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, g.replicate(1, a.cols()));
  });
}

Var sum_cols(Var a) {
  Matrix out = a.value().colwise().sum();
  return a.tape->record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, g.replicate(a.rows(), 1));
  });
}

Var trace(Var a) {
  if (a.rows() != a.cols()) throw DimensionError("trace: matrix is not square");
  return a.tape->record(Matrix::Constant(1, 1, a.value().trace()), {a},
                        [a](const Matrix& g, Tape& t) {
                          Matrix d = Matrix::Zero(a.rows(), a.cols());
                          d.diagonal().setConstant(g(0, 0));
                          t.accumulate(a, d);
                        });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts.front().tape->record(
      std::move(out), parts, [keep, offsets](const Matrix& g, Tape& t) {
        for (std::size_t i = 0; i < keep.size(); ++i) {
          if (t.requires_grad(keep[i])) t.accumulate(keep[i], g.middleCols(offsets[i], keep[i].cols()));
        }
      });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index width) {
  if (start < 0 || width < 0 || start + width > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds");
  }
  Matrix out = a.value().middleCols(start, width);
  return a.tape->record(std::move(out), {a}, [a, start, width](const Matrix& g, Tape& t) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, width) = g;
    t.accumulate(a, full);
  });
}

Var rowwise_outer(Var f, Var g) {
  if (f.rows() != g.rows()) throw DimensionError("rowwise_outer: batch size mismatch");
  const Eigen::Index df = f.cols(), dg = g.cols();
  Matrix out(f.rows(), df * dg);
  for (Eigen::Index b = 0; b < f.rows(); ++b) {
    for (Eigen::Index k = 0; k < df; ++k) {
      for (Eigen::Index j = 0; j < dg; ++j) out(b, k * dg + j) = f.value()(b, k) * g.value()(b, j);
    }
  }
  return f.tape->record(std::move(out), {f, g}, [f, g, df, dg](const Matrix& go, Tape& t) {
    const Matrix& fv = f.value();
    const Matrix& gv = g.value();
    if (t.requires_grad(f)) {
      Matrix gf = Matrix::Zero(fv.rows(), df);
      for (Eigen::Index b = 0; b < fv.rows(); ++b)
        for (Eigen::Index k = 0; k < df; ++k)
          for (Eigen::Index j = 0; j < dg; ++j) gf(b, k) += go(b, k * dg + j) * gv(b, j);
      t.accumulate(f, gf);
    }
    if (t.requires_grad(g)) {
      Matrix gg = Matrix::Zero(gv.rows(), dg);
      for (Eigen::Index b = 0; b < fv.rows(); ++b)
        for (Eigen::Index k = 0; k < df; ++k)
          for (Eigen::Index j = 0; j < dg; ++j) gg(b, j) += go(b, k * dg + j) * fv(b, k);
      t.accumulate(g, gg);
    }
  });
}

Var rms_normalize_rows(Var a, double eps) {
  const double d = static_cast<double>(a.cols());
  Matrix r = ((a.value().cwiseProduct(a.value()).rowwise().sum() / d).array() + eps).sqrt().matrix();
  Matrix out = a.value().cwiseQuotient(r.replicate(1, a.cols()));
  Matrix y = out;
  return a.tape->record(std::move(out), {a}, [a, y, r, d](const Matrix& g, Tape& t) {
    Matrix dots = g.cwiseProduct(y).rowwise().sum() / d;
    Matrix ga = (g - y.cwiseProduct(dots.replicate(1, y.cols()))).cwiseQuotient(r.replicate(1, y.cols()));
    t.accumulate(a, ga);
  });
}

Var softmax_rows(Var a) {
  Matrix out = softmax_of(a.value());
  Matrix s = out;
  return a.tape->record(std::move(out), {a}, [a, s](const Matrix& g, Tape& t) {
    // ds = s * (g - <g, s>) row-wise
    Matrix dots = g.cwiseProduct(s).rowwise().sum();
    Matrix ga = s.cwiseProduct(g - dots.replicate(1, s.cols()));
    t.accumulate(a, ga);
  });
}

Var log_softmax_rows(Var a) {
  Matrix out = log_softmax_of(a.value());
  Matrix s = out.array().exp();
  return a.tape->record(std::move(out), {a}, [a, s](const Matrix& g, Tape& t) {
    Matrix gs = g.rowwise().sum();
    t.accumulate(a, g - s.cwiseProduct(gs.replicate(1, s.cols())));
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  Matrix ls = log_softmax_of(logits.value());
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= logits.cols()) throw DimensionError("cross_entropy: label out of range");
    total -= ls(b, y);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  Matrix p = ls.array().exp();
  return logits.tape->record(Matrix::Constant(1, 1, total / static_cast<double>(n)), {logits},
                             [logits, ys, p, n](const Matrix& g, Tape& t) {
                               Matrix d = p;
                               for (Eigen::Index b = 0; b < n; ++b) d(b, ys[static_cast<std::size_t>(b)]) -= 1.0;
                               t.accumulate(logits, d * (g(0, 0) / static_cast<double>(n)));
                             });
}

Var soft_cross_entropy(Var target_probs, Var logits) {
  if (target_probs.rows() != logits.rows() || target_probs.cols() != logits.cols()) {
    throw DimensionError("soft_cross_entropy: target and logits shapes differ");
  }
  const double n = static_cast<double>(logits.rows());
  Matrix ls = log_softmax_of(logits.value());
  const double v = -target_probs.value().cwiseProduct(ls).sum() / n;
  return logits.tape->record(
      Matrix::Constant(1, 1, v), {target_probs, logits},
      [target_probs, logits, ls, n](const Matrix& g, Tape& t) {
        const double s = g(0, 0) / n;
        const Matrix& q = target_probs.value();
        if (t.requires_grad(target_probs)) t.accumulate(target_probs, -ls * s);
        if (t.requires_grad(logits)) {
          Matrix p = ls.array().exp();
          Matrix qs = q.rowwise().sum();
          t.accumulate(logits, (p.cwiseProduct(qs.replicate(1, p.cols())) - q) * s);
        }
      });
}

Var grad_reverse(Var a, double coeff) {
  return a.tape->record(a.value(), {a},
                        [a, coeff](const Matrix& g, Tape& t) { t.accumulate(a, g * (-coeff)); });
}

Var pairwise_sqdist(Var a, Var b) {
  if (a.cols() != b.cols()) throw DimensionError("pairwise_sqdist: width mismatch");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), bv.rows());
  for (Eigen::Index i = 0; i < av.rows(); ++i)
    for (Eigen::Index j = 0; j < bv.rows(); ++j) out(i, j) = (av.row(i) - bv.row(j)).squaredNorm();
  return a.tape->record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    // d/da_i = 2 sum_j g_ij (a_i - b_j); d/db_j = -2 sum_i g_ij (a_i - b_j)
    const Matrix rs = g.rowwise().sum();
    const Matrix cs = g.colwise().sum();
    if (t.requires_grad(a)) {
      Matrix ga = 2.0 * (av.cwiseProduct(rs.replicate(1, av.cols())) - g * bv);
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      Matrix gb = 2.0 * (bv.cwiseProduct(cs.transpose().replicate(1, bv.cols())) - g.transpose() * av);
      t.accumulate(b, gb);
    }
  });
}

}  // namespace imed::ad
