#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccm/tensor.hpp"

namespace ccm::ad {

// Primitive operation kinds recorded on the tape.
//
// Shape rules (row-major, rank 1 or 2; a scalar is shape [1]):
//   MatMul             [m,k]x[k,n] -> [m,n]   or   [m,k]x[k] -> [m]
//   Add/Sub/Mul        equal shapes, or either operand a scalar (broadcast)
//   Tanh/Sigmoid/Relu/SignedSqrt/Log/Scale/AddScalar/Clamp   elementwise
//   Softmax            rank-1 (axis 0) or rank-2 (axis 0 = down columns,
//                      axis 1 = along rows); slices each sum to 1
//   L2Normalize        rank-1; divides by (||x|| + 1e-8)
//   Concat             rank-1 operands, axis 0
//   CrossEntropyLogits rank-1 logits + class label -> scalar
//   Mean/Sum           all elements -> scalar
//   Slice              rank-1, half-open [from, to)
//   TakeRow            rank-2 -> one row as rank-1 (embedding lookup)
//   Reshape            same element count
enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Tanh,
  Sigmoid,
  Relu,
  Softmax,
  SignedSqrt,
  L2Normalize,
  Concat,
  Log,
  CrossEntropyLogits,
  Mean,
  Sum,
  Scale,
  AddScalar,
  Clamp,
  Slice,
  TakeRow,
  Reshape,
};

class Tape;

// Lightweight handle to a tape node. Copyable; never outlives its tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  Shape shape() const;
  std::span<const double> values() const;
  // Gradient of the last backward() root w.r.t. this node. Valid only after
  // backward() on a graph this node participates in.
  std::span<const double> grad() const;
  double scalar() const;  // value of a single-element tensor
  bool requires_grad() const;
};

// Reverse-mode tape. Built fresh per forward pass (reset() keeps capacity),
// topologically ordered by construction, evaluated eagerly.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void reset();
  int size() const { return static_cast<int>(nodes_.size()); }

  // A checkpoint of the tape's growth state. rewind(m) drops every node
  // recorded after mark() returned m while keeping earlier nodes and their
  // values intact, so one set of bound parameters can serve many forwards.
  struct Mark {
    int nodes = 0;
    std::int64_t values = 0;
    std::int64_t saved = 0;
    int inputs = 0;
  };
  Mark mark() const;
  void rewind(const Mark& m);

  Var leaf(const Shape& shape, std::span<const double> values,
           bool requires_grad = false);
  Var leaf(const Tensor& t, bool requires_grad = false);
  Var scalar_leaf(double v, bool requires_grad = false);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var relu(Var x);
  Var softmax(Var x, int axis = 0);
  Var signed_sqrt(Var x);
  Var l2_normalize(Var x);
  Var concat(std::span<const Var> xs, int axis = 0);
  Var log(Var x);
  Var cross_entropy_logits(Var logits, int label);
  Var mean(Var x);
  Var sum(Var x);
  Var scale(Var x, double c);
  Var add_scalar(Var x, double c);
  Var clamp(Var x, double lo, double hi);
  Var slice(Var x, int from, int to);
  Var take_row(Var m, int row);
  Var reshape(Var x, const Shape& s);

  // Generic dispatcher covering every kind that takes no extra arguments.
  Var apply(Op kind, std::span<const Var> operands);

  // Accumulates d(root)/d(node) into every requires-grad node reachable from
  // root. root must be a single-element tensor recorded on this tape.
  void backward(Var root);

  Shape shape_of(int id) const;
  std::span<const double> values_of(int id) const;
  std::span<const double> grad_of(int id) const;
  bool requires_grad_of(int id) const;

  // Throws if the node holds a non-finite value; `what` names the quantity.
  void check_finite(Var v, const char* what) const;

 private:
  struct Node {
    Op kind = Op::Leaf;
    std::uint8_t rank = 1;
    bool requires_grad = false;
    int d0 = 0, d1 = 1;       // dims; d1 == 1 for rank 1
    int a = -1, b = -1;       // input node ids
    int in_off = 0, in_n = 0; // extra inputs (Concat) in input_pool_
    std::int64_t val_off = 0;
    std::int64_t saved_off = 0;
    int saved_n = 0;
    double s0 = 0.0, s1 = 0.0;  // scalar args (Scale/AddScalar/Clamp)
    int i0 = 0, i1 = 0;         // int args (axis/label/slice bounds/row)
  };

  int64_t node_numel(const Node& n) const {
    return static_cast<int64_t>(n.d0) * n.d1;
  }
  const Node& node(int id) const;
  int push_node(Node n, int64_t out_numel);
  double* val_ptr(const Node& n) { return val_buf_.data() + n.val_off; }
  const double* val_ptr(const Node& n) const { return val_buf_.data() + n.val_off; }
  double* adj_ptr(const Node& n) { return adj_buf_.data() + n.val_off; }
  double* saved_ptr(const Node& n) { return saved_buf_.data() + n.saved_off; }
  const double* saved_ptr(const Node& n) const { return saved_buf_.data() + n.saved_off; }
  int64_t alloc_saved(Node& n, int count);
  void require_same_tape(Var v, const char* op) const;
  Var unary_elementwise(Op kind, Var x);
  void backward_node(int id);

  std::vector<Node> nodes_;
  std::vector<double> val_buf_;
  std::vector<double> adj_buf_;
  std::vector<double> saved_buf_;
  std::vector<int> input_pool_;
};

// Free-function sugar so graph-building code reads like math.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var x);
Var sigmoid(Var x);
Var relu(Var x);
Var softmax(Var x, int axis = 0);
Var signed_sqrt(Var x);
Var l2_normalize(Var x);
Var concat(std::span<const Var> xs, int axis = 0);
Var log(Var x);
Var cross_entropy_logits(Var logits, int label);
Var mean(Var x);
Var sum(Var x);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var clamp(Var x, double lo, double hi);
Var slice(Var x, int from, int to);
Var take_row(Var m, int row);
Var reshape(Var x, const Shape& s);

}  // namespace ccm::ad
