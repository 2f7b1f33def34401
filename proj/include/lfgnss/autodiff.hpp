#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace lfgnss::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Primitive kinds, used to address adjoints (fault injection for negative-control tests).
enum class Op {
  Leaf, Add, AddRowBroadcast, Sub, Mul, MulScalarVar, DivScalarVar, Scale, AddScalar, MatMul, Transpose, Reshape, ConcatCols,
  SliceCols, SliceRows, Diag, Softmax, Relu, Softplus, LayerNorm, SpdSolve, Reciprocal, Sqrt, Exp, Log, Pow,
  Sum, Mean, RowSum, MaxStopGradient, Max, Count
};

/// Define-by-run recording of dense-matrix operations. Nodes are appended in creation order,
/// so reverse creation order is a reverse topological order.
class Tape {
 public:
  Tape() { adjoint_scale_.fill(1.0); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws NonScalarSeed unless loss is 1x1.
  void backward(Var loss);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  /// Accumulated gradient, zeros when nothing flowed into the node.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

  /// Test hook: multiplies every contribution produced by `op`'s adjoint by `scale`.
  void set_adjoint_scale(Op op, double scale) { adjoint_scale_[static_cast<std::size_t>(op)] = scale; }

  // Internal API for primitive implementations.
  using Backprop = std::function<void(Tape&, const Matrix& grad_out)>;
  Var record(Matrix value, std::initializer_list<Var> inputs, Op op, Backprop backprop);
  Var record(Matrix value, const std::vector<Var>& inputs, Op op, Backprop backprop);
  void accumulate(Var v, const Matrix& contribution);
  void check_input(Var v) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Op op = Op::Leaf;
    Backprop backprop;
  };

  std::vector<Node> nodes_;
  std::array<double, static_cast<std::size_t>(Op::Count)> adjoint_scale_{};
  Op current_op_ = Op::Leaf;
};

// Elementwise / structural primitives. Shapes must agree exactly unless noted.
Var add(Var a, Var b);
Var add_row_broadcast(Var a, Var row);  // a: n x m, row: 1 x m
Var sub(Var a, Var b);
Var mul(Var a, Var b);                  // Hadamard
Var mul_scalar_var(Var a, Var s);       // s: 1 x 1
Var div_scalar_var(Var a, Var s);       // a / s, s: 1 x 1
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);  // column-major reinterpretation
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var diag(Var v);  // n x 1 -> n x n

Var softmax_rows(Var a);
Var relu(Var a);
Var softplus(Var a);
/// Per-row (x - mean) / (std + eps) * gamma + beta with population std; gamma, beta: 1 x d.
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
/// X = A^-1 B for symmetric positive-definite A via Cholesky. Throws NotSPD.
Var spd_solve(Var a, Var b);

Var reciprocal(Var a);
Var sqrt(Var a);
Var exp(Var a);
Var log(Var a);
Var pow(Var base, Var exponent);

Var sum(Var a);      // 1 x 1
Var mean(Var a);     // 1 x 1
Var row_sum(Var a);  // n x 1
Var max_stop_gradient(Var a);  // 1 x 1, no gradient flows
Var max(Var a);                // 1 x 1, gradient routed to the first argmax

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// Plain-value helpers shared with non-taped code.
double softplus_value(double x);
double sigmoid_value(double x);
double inverse_softplus(double y);

}  // namespace lfgnss::ad
