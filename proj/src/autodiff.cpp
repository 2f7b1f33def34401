#include "lfgnss/autodiff.hpp"

#include <cmath>
#include <string>

#include "lfgnss/error.hpp"

namespace lfgnss::ad {

const Matrix& Var::value() const { return tape->value(*this); }

// ---- tape -----------------------------------------------------------------

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::check_input(Var v) const {
  if (v.tape != this) throw Error(Errc::GraphCycle, "variable belongs to another tape");
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error(Errc::GraphCycle, "input node not yet recorded");
  }
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Op op, Backprop backprop) {
  bool needs = false;
  for (Var in : inputs) {
    check_input(in);
    needs = needs || nodes_[static_cast<std::size_t>(in.id)].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  n.op = op;
  if (needs) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Op op, Backprop backprop) {
  return record(std::move(value), std::vector<Var>(inputs), op, std::move(backprop));
}

void Tape::accumulate(Var v, const Matrix& contribution) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.requires_grad) return;
  const double k = adjoint_scale_[static_cast<std::size_t>(current_op_)];
  if (!n.has_grad) {
    n.grad = k == 1.0 ? contribution : Matrix(k * contribution);
    n.has_grad = true;
  } else if (k == 1.0) {
    n.grad += contribution;
  } else {
    n.grad += k * contribution;
  }
}

void Tape::backward(Var loss) {
  check_input(loss);
  if (value(loss).rows() != 1 || value(loss).cols() != 1) {
    throw Error(Errc::NonScalarSeed, "loss must be 1x1");
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  Node& seed = nodes_[static_cast<std::size_t>(loss.id)];
  if (!seed.requires_grad) return;
  seed.grad = Matrix::Ones(1, 1);
  seed.has_grad = true;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.backprop) continue;
    current_op_ = n.op;
    const Matrix g = n.grad;
    n.backprop(*this, g);
  }
  current_op_ = Op::Leaf;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::clear() { nodes_.clear(); }

// ---- primitives -----------------------------------------------------------

namespace {

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                         std::to_string(b.cols()));
  }
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error(Errc::GraphCycle, "unbound variable");
  return *a.tape;
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, Op::Add, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var add_row_broadcast(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error(Errc::ShapeMismatch, "add_row_broadcast");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return tape_of(a).record(std::move(out), {a, row}, Op::AddRowBroadcast, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, Op::Sub, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b}, Op::Mul, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var mul_scalar_var(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw Error(Errc::ShapeMismatch, "mul_scalar_var expects 1x1 scale");
  const double k = s.value()(0, 0);
  return tape_of(a).record(a.value() * k, {a, s}, Op::MulScalarVar, [a, s](Tape& t, const Matrix& g) {
    t.accumulate(a, g * s.value()(0, 0));
    t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

Var div_scalar_var(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw Error(Errc::ShapeMismatch, "div_scalar_var expects 1x1 divisor");
  const double k = s.value()(0, 0);
  Matrix y = a.value() / k;
  return tape_of(a).record(y, {a, s}, Op::DivScalarVar, [a, s, y](Tape& t, const Matrix& g) {
    const double d = s.value()(0, 0);
    t.accumulate(a, g / d);
    t.accumulate(s, Matrix::Constant(1, 1, -g.cwiseProduct(y).sum() / d));
  });
}

Var scale(Var a, double k) {
  return tape_of(a).record(a.value() * k, {a}, Op::Scale, [a, k](Tape& t, const Matrix& g) { t.accumulate(a, g * k); });
}

Var add_scalar(Var a, double k) {
  return tape_of(a).record(a.value().array() + k, {a}, Op::AddScalar,
                           [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw Error(Errc::ShapeMismatch, "matmul inner dimensions");
  return tape_of(a).record(a.value() * b.value(), {a, b}, Op::MatMul, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  return tape_of(a).record(a.value().transpose(), {a}, Op::Transpose,
                           [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw Error(Errc::ShapeMismatch, "reshape size");
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  Matrix out = a.value().reshaped(rows, cols);
  return tape_of(a).record(std::move(out), {a}, Op::Reshape,
                           [a, r0, c0](Tape& t, const Matrix& g) { t.accumulate(a, g.reshaped(r0, c0)); });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat of nothing");
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (p.rows() != parts[0].rows()) throw Error(Errc::ShapeMismatch, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return tape_of(parts[0]).record(std::move(out), parts, Op::ConcatCols, [parts](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) throw Error(Errc::ShapeMismatch, "slice_cols range");
  return tape_of(a).record(a.value().middleCols(start, count), {a}, Op::SliceCols,
                           [a, start, count](Tape& t, const Matrix& g) {
                             Matrix full = Matrix::Zero(a.rows(), a.cols());
                             full.middleCols(start, count) = g;
                             t.accumulate(a, full);
                           });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.rows()) throw Error(Errc::ShapeMismatch, "slice_rows range");
  return tape_of(a).record(a.value().middleRows(start, count), {a}, Op::SliceRows,
                           [a, start, count](Tape& t, const Matrix& g) {
                             Matrix full = Matrix::Zero(a.rows(), a.cols());
                             full.middleRows(start, count) = g;
                             t.accumulate(a, full);
                           });
}

Var diag(Var v) {
  if (v.cols() != 1) throw Error(Errc::ShapeMismatch, "diag expects a column vector");
  Matrix out = v.value().col(0).asDiagonal();
  return tape_of(v).record(std::move(out), {v}, Op::Diag,
                           [v](Tape& t, const Matrix& g) { t.accumulate(v, g.diagonal()); });
}

Var softmax_rows(Var a) {
  Matrix y(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    y.row(r) = (a.value().row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  Tape& tape = tape_of(a);
  return tape.record(y, {a}, Op::Softmax, [a, y](Tape& t, const Matrix& g) {
    const Eigen::VectorXd inner = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = y.cwiseProduct(g.colwise() - inner);
    t.accumulate(a, ga);
  });
}

Var relu(Var a) {
  return tape_of(a).record(a.value().cwiseMax(0.0), {a}, Op::Relu, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

double softplus_value(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double inverse_softplus(double y) { return y + std::log(-std::expm1(-y)); }

Var softplus(Var a) {
  return tape_of(a).record(a.value().unaryExpr(&softplus_value), {a}, Op::Softplus, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(&sigmoid_value)));
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw Error(Errc::ShapeMismatch, "layer_norm parameter shape");
  }
  Matrix centered(n, d), xhat(n, d);
  Eigen::VectorXd sigma(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    centered.row(r) = x.value().row(r).array() - x.value().row(r).mean();
    sigma(r) = std::sqrt(centered.row(r).squaredNorm() / static_cast<double>(d));
    xhat.row(r) = centered.row(r) / (sigma(r) + eps);
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return tape_of(x).record(std::move(out), {x, gamma, beta}, Op::LayerNorm,
                           [x, gamma, beta, centered, xhat, sigma, eps, d](Tape& t, const Matrix& g) {
                             t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                             t.accumulate(beta, g.colwise().sum());
                             if (!t.requires_grad(x)) return;
                             const Matrix gx_hat = g.array().rowwise() * gamma.value().row(0).array();
                             Matrix gx(gx_hat.rows(), d);
                             for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                               const double s = sigma(r) + eps;
                               gx.row(r) = (gx_hat.row(r).array() - gx_hat.row(r).mean()) / s;
                               if (sigma(r) > 0.0) {
                                 const double proj = gx_hat.row(r).dot(centered.row(r));
                                 gx.row(r) -= centered.row(r) * (proj / (s * s * static_cast<double>(d) * sigma(r)));
                               }
                             }
                             t.accumulate(x, gx);
                           });
}

Var spd_solve(Var a, Var b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) throw Error(Errc::ShapeMismatch, "spd_solve shapes");
  Eigen::LLT<Matrix> llt(a.value());
  if (llt.info() != Eigen::Success) throw Error(Errc::NotSPD, "matrix is not positive definite");
  Matrix x = llt.solve(b.value());
  return tape_of(a).record(x, {a, b}, Op::SpdSolve, [a, b, llt, x](Tape& t, const Matrix& g) {
    // X = A^-1 B:  gB = A^-T gX,  gA = -gB X^T.
    const Matrix gb = llt.solve(g);
    t.accumulate(b, gb);
    if (t.requires_grad(a)) t.accumulate(a, -gb * x.transpose());
  });
}

Var reciprocal(Var a) {
  Matrix y = a.value().cwiseInverse();
  return tape_of(a).record(y, {a}, Op::Reciprocal,
                           [a, y](Tape& t, const Matrix& g) { t.accumulate(a, -g.cwiseProduct(y.cwiseAbs2())); });
}

// Elementwise math goes through the C library so values round exactly like scalar code.
Var sqrt(Var a) {
  Matrix y = a.value().unaryExpr([](double v) { return std::sqrt(v); });
  return tape_of(a).record(y, {a}, Op::Sqrt, [a, y](Tape& t, const Matrix& g) {
    // Zero subgradient at the origin.
    t.accumulate(a, (y.array() > 0.0).select(g.array() / (2.0 * y.array()), 0.0).matrix());
  });
}

Var exp(Var a) {
  Matrix y = a.value().unaryExpr([](double v) { return std::exp(v); });
  return tape_of(a).record(y, {a}, Op::Exp, [a, y](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseProduct(y)); });
}

Var log(Var a) {
  return tape_of(a).record(a.value().array().log(), {a}, Op::Log,
                           [a](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseQuotient(a.value())); });
}

Var pow(Var base, Var exponent) {
  same_shape(base, exponent, "pow");
  Matrix y = base.value().binaryExpr(exponent.value(), [](double x, double e) { return std::pow(x, e); });
  return tape_of(base).record(y, {base, exponent}, Op::Pow, [base, exponent, y](Tape& t, const Matrix& g) {
    const auto& a = base.value().array();
    const auto& b = exponent.value().array();
    if (t.requires_grad(base)) {
      t.accumulate(base, (g.array() * b * a.pow(b - 1.0)).matrix());
    }
    if (t.requires_grad(exponent)) {
      t.accumulate(exponent, (a > 0.0).select(g.array() * y.array() * a.log(), 0.0).matrix());
    }
  });
}

Var sum(Var a) {
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum()), {a}, Op::Sum, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().mean()), {a}, Op::Mean, [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var row_sum(Var a) {
  return tape_of(a).record(a.value().rowwise().sum(), {a}, Op::RowSum, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.col(0).replicate(1, a.cols()));
  });
}

Var max_stop_gradient(Var a) {
  return tape_of(a).constant(Matrix::Constant(1, 1, a.value().maxCoeff()));
}

Var max(Var a) {
  Eigen::Index r = 0, c = 0;
  const double m = a.value().maxCoeff(&r, &c);
  return tape_of(a).record(Matrix::Constant(1, 1, m), {a}, Op::Max, [a, r, c](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga(r, c) = g(0, 0);
    t.accumulate(a, ga);
  });
}

}  // namespace lfgnss::ad
