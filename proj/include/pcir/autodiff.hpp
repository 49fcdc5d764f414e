#pragma once

#include <array>
#include <utility>
#include <vector>

#include "pcir/tensor.hpp"

namespace pcir::ad {

enum class OpKind {
  Leaf,
  Add,
  Sub,
  Mul,
  MatMul,
  Mean,
  Sum,
  Square,
  Sqrt,
  Exp,
  Tanh,
  Relu,
  Negate,
  Scale,
  Concat,
  Slice,
};

const char* op_name(OpKind op);

/// One record on the tape. Parents always have smaller ids than the node.
struct TapeNode {
  OpKind op = OpKind::Leaf;
  std::array<int, 2> parents{-1, -1};
  Matrix value;
  Matrix grad;
  bool needs_grad = false;
  // Op attributes: scale factor, matmul transpose flags, concat/slice axis
  // and slice window.
  double factor = 1.0;
  bool transpose_lhs = false;
  bool transpose_rhs = false;
  int axis = 0;
  Index offset = 0;
  Index length = 0;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
};

/// Define-by-run tape. Ops evaluate eagerly as they are recorded; `forward`
/// replays the recorded graph on new leaf values.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input: gradients are accumulated for it.
  Var parameter(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  /// Replaces a leaf value without re-evaluating; `backward` refuses to run
  /// until `forward` has brought the tape up to date.
  void assign(Var leaf, Matrix value);

  /// Re-evaluates every node up to `root` after replacing the given leaf
  /// values. Leaf shapes are fixed at creation.
  const Matrix& forward(Var root, const std::vector<std::pair<Var, Matrix>>& inputs = {});

  /// Reverse-mode sweep from a scalar root. Gradients of earlier calls are
  /// discarded.
  void backward(Var root);

  const TapeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  // Used by the op constructors below.
  Var record(TapeNode node);

 private:
  void check_owned(Var v) const;
  void evaluate(TapeNode& node) const;
  void propagate(const TapeNode& node);

  std::vector<TapeNode> nodes_;
  bool stale_ = false;
};

// Elementwise binary ops broadcast a dimension of size 1 against the other
// operand (row vectors over batches, column vectors across columns).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b, bool transpose_lhs = false, bool transpose_rhs = false);
Var mean(Var a);
Var sum(Var a);
Var square(Var a);
Var sqrt(Var a);
Var exp(Var a);
Var tanh(Var a);
Var relu(Var a);
Var negate(Var a);
Var scale(Var a, double factor);
/// axis 0 stacks rows, axis 1 appends columns.
Var concat(Var a, Var b, int axis);
Var slice(Var a, int axis, Index offset, Index length);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return negate(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace pcir::ad
