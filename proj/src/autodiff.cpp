#include "pcir/autodiff.hpp"

#include <cmath>
#include <string>

namespace pcir::ad {

namespace {

Index broadcast_dim(Index a, Index b, OpKind op) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ConfigError(std::string("shape mismatch in ") + op_name(op));
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a broadcast gradient back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix r = g;
  if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

void accumulate(TapeNode& parent, const Matrix& g) {
  if (!parent.needs_grad) return;
  if (parent.grad.size() == 0) {
    parent.grad = g;
  } else {
    parent.grad += g;
  }
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Exp: return "exp";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Negate: return "negate";
    case OpKind::Scale: return "scale";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
  }
  return "?";
}

const Matrix& Var::value() const { return tape->node(id).value; }
const Matrix& Var::grad() const { return tape->node(id).grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ConfigError("scalar() on non-scalar " + shape_str(v));
  return v(0, 0);
}

Var Tape::parameter(Matrix value) {
  require_finite(value, "parameter");
  TapeNode n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  require_finite(value, "constant");
  TapeNode n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw ConfigError("variable does not belong to this tape");
}

Var Tape::record(TapeNode node) {
  for (int p : node.parents) {
    if (p < 0) continue;
    node.needs_grad = node.needs_grad || nodes_[static_cast<std::size_t>(p)].needs_grad;
  }
  evaluate(node);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::evaluate(TapeNode& n) const {
  if (n.op == OpKind::Leaf) return;
  const Matrix& a = nodes_[static_cast<std::size_t>(n.parents[0])].value;
  const Matrix* b = n.parents[1] >= 0 ? &nodes_[static_cast<std::size_t>(n.parents[1])].value : nullptr;
  switch (n.op) {
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      const Index r = broadcast_dim(a.rows(), b->rows(), n.op);
      const Index c = broadcast_dim(a.cols(), b->cols(), n.op);
      Matrix ea = expand(a, r, c), eb = expand(*b, r, c);
      if (n.op == OpKind::Add) n.value = ea + eb;
      else if (n.op == OpKind::Sub) n.value = ea - eb;
      else n.value = ea.cwiseProduct(eb);
      break;
    }
    case OpKind::MatMul: {
      const Index inner_a = n.transpose_lhs ? a.rows() : a.cols();
      const Index inner_b = n.transpose_rhs ? b->cols() : b->rows();
      if (inner_a != inner_b)
        throw ConfigError("shape mismatch in matmul: " + shape_str(a) + " and " + shape_str(*b));
      if (n.transpose_lhs && n.transpose_rhs) n.value = a.transpose() * b->transpose();
      else if (n.transpose_lhs) n.value = a.transpose() * *b;
      else if (n.transpose_rhs) n.value = a * b->transpose();
      else n.value = a * *b;
      break;
    }
    case OpKind::Mean: n.value = Matrix::Constant(1, 1, a.mean()); break;
    case OpKind::Sum: n.value = Matrix::Constant(1, 1, a.sum()); break;
    case OpKind::Square: n.value = a.array().square().matrix(); break;
    case OpKind::Sqrt:
      if ((a.array() < 0.0).any()) throw NumericError("sqrt of negative value");
      n.value = a.array().sqrt().matrix();
      break;
    case OpKind::Exp: n.value = a.array().exp().matrix(); break;
    case OpKind::Tanh: n.value = a.array().tanh().matrix(); break;
    case OpKind::Relu: n.value = a.array().max(0.0).matrix(); break;
    case OpKind::Negate: n.value = -a; break;
    case OpKind::Scale: n.value = n.factor * a; break;
    case OpKind::Concat:
      if (n.axis == 0) {
        if (a.cols() != b->cols()) throw ConfigError("shape mismatch in concat");
        n.value.resize(a.rows() + b->rows(), a.cols());
        n.value << a, *b;
      } else {
        if (a.rows() != b->rows()) throw ConfigError("shape mismatch in concat");
        n.value.resize(a.rows(), a.cols() + b->cols());
        n.value << a, *b;
      }
      break;
    case OpKind::Slice: {
      const Index extent = n.axis == 0 ? a.rows() : a.cols();
      if (n.offset < 0 || n.length < 1 || n.offset + n.length > extent)
        throw ConfigError("slice window out of range");
      n.value = n.axis == 0 ? Matrix(a.middleRows(n.offset, n.length))
                            : Matrix(a.middleCols(n.offset, n.length));
      break;
    }
    case OpKind::Leaf: break;
  }
  require_finite(n.value, op_name(n.op));
}

void Tape::propagate(const TapeNode& n) {
  if (n.op == OpKind::Leaf || n.grad.size() == 0) return;
  TapeNode& pa = nodes_[static_cast<std::size_t>(n.parents[0])];
  TapeNode* pb = n.parents[1] >= 0 ? &nodes_[static_cast<std::size_t>(n.parents[1])] : nullptr;
  const Matrix& g = n.grad;
  switch (n.op) {
    case OpKind::Add:
      accumulate(pa, reduce_to(g, pa.value.rows(), pa.value.cols()));
      accumulate(*pb, reduce_to(g, pb->value.rows(), pb->value.cols()));
      break;
    case OpKind::Sub:
      accumulate(pa, reduce_to(g, pa.value.rows(), pa.value.cols()));
      accumulate(*pb, reduce_to(-g, pb->value.rows(), pb->value.cols()));
      break;
    case OpKind::Mul: {
      const Matrix ea = expand(pa.value, g.rows(), g.cols());
      const Matrix eb = expand(pb->value, g.rows(), g.cols());
      if (pa.needs_grad) accumulate(pa, reduce_to(g.cwiseProduct(eb), pa.value.rows(), pa.value.cols()));
      if (pb->needs_grad) accumulate(*pb, reduce_to(g.cwiseProduct(ea), pb->value.rows(), pb->value.cols()));
      break;
    }
    case OpKind::MatMul: {
      // C = op(A) op(B); dop(A) = G op(B)^T, dop(B) = op(A)^T G.
      const Matrix& A = pa.value;
      const Matrix& B = pb->value;
      if (pa.needs_grad) {
        const Matrix opb = n.transpose_rhs ? Matrix(B.transpose()) : B;
        Matrix d = g * opb.transpose();
        accumulate(pa, n.transpose_lhs ? Matrix(d.transpose()) : d);
      }
      if (pb->needs_grad) {
        const Matrix opa = n.transpose_lhs ? Matrix(A.transpose()) : A;
        Matrix d = opa.transpose() * g;
        accumulate(*pb, n.transpose_rhs ? Matrix(d.transpose()) : d);
      }
      break;
    }
    case OpKind::Mean:
      accumulate(pa, Matrix::Constant(pa.value.rows(), pa.value.cols(),
                                      g(0, 0) / static_cast<double>(pa.value.size())));
      break;
    case OpKind::Sum:
      accumulate(pa, Matrix::Constant(pa.value.rows(), pa.value.cols(), g(0, 0)));
      break;
    case OpKind::Square: accumulate(pa, (2.0 * g.array() * pa.value.array()).matrix()); break;
    case OpKind::Sqrt: {
      Matrix d = (0.5 * g.array() / n.value.array()).matrix();
      require_finite(d, "sqrt gradient");
      accumulate(pa, d);
      break;
    }
    case OpKind::Exp: accumulate(pa, g.cwiseProduct(n.value)); break;
    case OpKind::Tanh:
      accumulate(pa, (g.array() * (1.0 - n.value.array().square())).matrix());
      break;
    case OpKind::Relu:
      accumulate(pa, (g.array() * (pa.value.array() > 0.0).cast<double>()).matrix());
      break;
    case OpKind::Negate: accumulate(pa, -g); break;
    case OpKind::Scale: accumulate(pa, n.factor * g); break;
    case OpKind::Concat:
      if (n.axis == 0) {
        accumulate(pa, g.topRows(pa.value.rows()));
        accumulate(*pb, g.bottomRows(pb->value.rows()));
      } else {
        accumulate(pa, g.leftCols(pa.value.cols()));
        accumulate(*pb, g.rightCols(pb->value.cols()));
      }
      break;
    case OpKind::Slice:
      if (pa.needs_grad) {
        Matrix d = Matrix::Zero(pa.value.rows(), pa.value.cols());
        if (n.axis == 0) d.middleRows(n.offset, n.length) = g;
        else d.middleCols(n.offset, n.length) = g;
        accumulate(pa, d);
      }
      break;
    case OpKind::Leaf: break;
  }
}

void Tape::assign(Var leaf, Matrix value) {
  check_owned(leaf);
  TapeNode& n = nodes_[static_cast<std::size_t>(leaf.id)];
  if (n.op != OpKind::Leaf) throw ConfigError("only leaves can be assigned");
  if (n.value.rows() != value.rows() || n.value.cols() != value.cols())
    throw ConfigError("input shape mismatch: expected " + shape_str(n.value) + ", got " +
                      shape_str(value));
  require_finite(value, "assigned input");
  n.value = std::move(value);
  stale_ = true;
}

const Matrix& Tape::forward(Var root, const std::vector<std::pair<Var, Matrix>>& inputs) {
  check_owned(root);
  for (const auto& [leaf, value] : inputs) {
    check_owned(leaf);
    TapeNode& n = nodes_[static_cast<std::size_t>(leaf.id)];
    if (n.op != OpKind::Leaf) throw ConfigError("forward inputs must be leaves");
    if (n.value.rows() != value.rows() || n.value.cols() != value.cols())
      throw ConfigError("input shape mismatch: expected " + shape_str(n.value) + ", got " +
                        shape_str(value));
    require_finite(value, "forward input");
    n.value = value;
  }
  for (int i = 0; i <= root.id; ++i) evaluate(nodes_[static_cast<std::size_t>(i)]);
  stale_ = false;
  return nodes_[static_cast<std::size_t>(root.id)].value;
}

void Tape::backward(Var root) {
  check_owned(root);
  if (stale_) throw ConfigError("backward called before forward");
  TapeNode& r = nodes_[static_cast<std::size_t>(root.id)];
  if (r.value.size() != 1) throw ConfigError("backward root must be scalar, got " + shape_str(r.value));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    const TapeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad) continue;
    propagate(n);
  }
  // Leaves the root does not depend on still report a zero gradient.
  for (auto& n : nodes_) {
    if (n.needs_grad && n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
}

namespace {

Var unary(OpKind op, Var a, double factor = 1.0) {
  TapeNode n;
  n.op = op;
  n.parents = {a.id, -1};
  n.factor = factor;
  return a.tape->record(std::move(n));
}

Var binary(OpKind op, Var a, Var b) {
  if (a.tape != b.tape) throw ConfigError("operands live on different tapes");
  TapeNode n;
  n.op = op;
  n.parents = {a.id, b.id};
  return a.tape->record(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return binary(OpKind::Add, a, b); }
Var sub(Var a, Var b) { return binary(OpKind::Sub, a, b); }
Var mul(Var a, Var b) { return binary(OpKind::Mul, a, b); }

Var matmul(Var a, Var b, bool transpose_lhs, bool transpose_rhs) {
  if (a.tape != b.tape) throw ConfigError("operands live on different tapes");
  TapeNode n;
  n.op = OpKind::MatMul;
  n.parents = {a.id, b.id};
  n.transpose_lhs = transpose_lhs;
  n.transpose_rhs = transpose_rhs;
  return a.tape->record(std::move(n));
}

Var mean(Var a) { return unary(OpKind::Mean, a); }
Var sum(Var a) { return unary(OpKind::Sum, a); }
Var square(Var a) { return unary(OpKind::Square, a); }
Var sqrt(Var a) { return unary(OpKind::Sqrt, a); }
Var exp(Var a) { return unary(OpKind::Exp, a); }
Var tanh(Var a) { return unary(OpKind::Tanh, a); }
Var relu(Var a) { return unary(OpKind::Relu, a); }
Var negate(Var a) { return unary(OpKind::Negate, a); }
Var scale(Var a, double factor) { return unary(OpKind::Scale, a, factor); }

Var concat(Var a, Var b, int axis) {
  if (a.tape != b.tape) throw ConfigError("operands live on different tapes");
  TapeNode n;
  n.op = OpKind::Concat;
  n.parents = {a.id, b.id};
  n.axis = axis;
  return a.tape->record(std::move(n));
}

Var slice(Var a, int axis, Index offset, Index length) {
  TapeNode n;
  n.op = OpKind::Slice;
  n.parents = {a.id, -1};
  n.axis = axis;
  n.offset = offset;
  n.length = length;
  return a.tape->record(std::move(n));
}

}  // namespace pcir::ad
