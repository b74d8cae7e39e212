#include "ccm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccm::ad {

namespace {

const char* op_name(Op k) {
  switch (k) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::Softmax: return "softmax";
    case Op::SignedSqrt: return "signed_sqrt";
    case Op::L2Normalize: return "l2_normalize";
    case Op::Concat: return "concat";
    case Op::Log: return "log";
    case Op::CrossEntropyLogits: return "cross_entropy_logits";
    case Op::Mean: return "mean";
    case Op::Sum: return "sum";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Clamp: return "clamp";
    case Op::Slice: return "slice";
    case Op::TakeRow: return "take_row";
    case Op::Reshape: return "reshape";
  }
  return "?";
}

[[noreturn]] void shape_error(Op k, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op_name(k)) + ": shape mismatch " +
                              shape_str(a) + " vs " + shape_str(b));
}

Shape make_shape(int rank, int d0, int d1) {
  return rank == 1 ? Shape{d0} : Shape{d0, d1};
}

}  // namespace

Shape Var::shape() const { return tape->shape_of(id); }
std::span<const double> Var::values() const { return tape->values_of(id); }
std::span<const double> Var::grad() const { return tape->grad_of(id); }
bool Var::requires_grad() const { return tape->requires_grad_of(id); }

double Var::scalar() const {
  auto v = values();
  if (v.size() != 1)
    throw std::invalid_argument("scalar() on tensor of " +
                                std::to_string(v.size()) + " elements");
  return v[0];
}

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("tape: node id " + std::to_string(id) +
                                " is not on this tape");
  return nodes_[id];
}

void Tape::reset() {
  nodes_.clear();
  val_buf_.clear();
  adj_buf_.clear();
  saved_buf_.clear();
  input_pool_.clear();
}

Tape::Mark Tape::mark() const {
  return {static_cast<int>(nodes_.size()), static_cast<int64_t>(val_buf_.size()),
          static_cast<int64_t>(saved_buf_.size()),
          static_cast<int>(input_pool_.size())};
}

void Tape::rewind(const Mark& m) {
  if (m.nodes > static_cast<int>(nodes_.size()))
    throw std::invalid_argument("rewind: mark is ahead of the tape");
  nodes_.resize(static_cast<std::size_t>(m.nodes));
  val_buf_.resize(static_cast<std::size_t>(m.values));
  saved_buf_.resize(static_cast<std::size_t>(m.saved));
  input_pool_.resize(static_cast<std::size_t>(m.inputs));
}

Shape Tape::shape_of(int id) const {
  const Node& n = node(id);
  return make_shape(n.rank, n.d0, n.d1);
}

std::span<const double> Tape::values_of(int id) const {
  const Node& n = node(id);
  return {val_buf_.data() + n.val_off, static_cast<std::size_t>(node_numel(n))};
}

std::span<const double> Tape::grad_of(int id) const {
  const Node& n = node(id);
  if (adj_buf_.size() != val_buf_.size())
    throw std::runtime_error("grad requested before backward()");
  return {adj_buf_.data() + n.val_off, static_cast<std::size_t>(node_numel(n))};
}

bool Tape::requires_grad_of(int id) const { return node(id).requires_grad; }

void Tape::check_finite(Var v, const char* what) const {
  for (double x : values_of(v.id))
    if (!std::isfinite(x))
      throw std::runtime_error(std::string(what) + " is non-finite");
}

int Tape::push_node(Node n, int64_t out_numel) {
  n.val_off = static_cast<int64_t>(val_buf_.size());
  val_buf_.resize(val_buf_.size() + static_cast<std::size_t>(out_numel));
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

int64_t Tape::alloc_saved(Node& n, int count) {
  n.saved_off = static_cast<int64_t>(saved_buf_.size());
  n.saved_n = count;
  saved_buf_.resize(saved_buf_.size() + static_cast<std::size_t>(count));
  return n.saved_off;
}

void Tape::require_same_tape(Var v, const char* op) const {
  if (!v.valid() || v.tape != this)
    throw std::invalid_argument(std::string(op) +
                                ": operand is not on this tape");
}

Var Tape::leaf(const Shape& shape, std::span<const double> values,
               bool requires_grad) {
  if (shape.empty() || shape.size() > 2)
    throw std::invalid_argument("leaf: tape supports rank 1 and 2, got " +
                                shape_str(shape));
  const int64_t n = numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("leaf: data size does not match shape " +
                                shape_str(shape));
  Node nd;
  nd.kind = Op::Leaf;
  nd.rank = static_cast<std::uint8_t>(shape.size());
  nd.d0 = shape[0];
  nd.d1 = nd.rank == 2 ? shape[1] : 1;
  nd.requires_grad = requires_grad;
  const int id = push_node(nd, n);
  std::copy(values.begin(), values.end(), val_ptr(nodes_[id]));
  return {this, id};
}

Var Tape::leaf(const Tensor& t, bool requires_grad) {
  return leaf(t.shape, t.values, requires_grad);
}

Var Tape::scalar_leaf(double v, bool requires_grad) {
  return leaf(Shape{1}, std::span<const double>(&v, 1), requires_grad);
}

Var Tape::matmul(Var a, Var b) {
  require_same_tape(a, "matmul");
  require_same_tape(b, "matmul");
  const Node& na = node(a.id);
  const Node& nb = node(b.id);
  if (na.rank != 2 || na.d1 != nb.d0)
    shape_error(Op::MatMul, shape_of(a.id), shape_of(b.id));
  Node nd;
  nd.kind = Op::MatMul;
  nd.a = a.id;
  nd.b = b.id;
  nd.requires_grad = na.requires_grad || nb.requires_grad;
  nd.rank = nb.rank;
  nd.d0 = na.d0;
  nd.d1 = nb.rank == 2 ? nb.d1 : 1;
  const int64_t m = na.d0, k = na.d1, n = nd.rank == 2 ? nd.d1 : 1;
  const int id = push_node(nd, m * n);
  const double* A = val_ptr(nodes_[a.id]);
  const double* B = val_ptr(nodes_[b.id]);
  double* C = val_ptr(nodes_[id]);
  std::fill(C, C + m * n, 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* Bp = B + p * n;
      double* Ci = C + i * n;
      for (int64_t j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
    }
  return {this, id};
}

namespace {
enum class Broadcast { None, ScalarA, ScalarB };
}

Var Tape::add(Var a, Var b) {
  require_same_tape(a, "add");
  require_same_tape(b, "add");
  const Node& na = node(a.id);
  const Node& nb = node(b.id);
  const int64_t la = node_numel(na), lb = node_numel(nb);
  const bool same = na.d0 == nb.d0 && na.d1 == nb.d1 && na.rank == nb.rank;
  if (!same && la != 1 && lb != 1)
    shape_error(Op::Add, shape_of(a.id), shape_of(b.id));
  const Node& big = la >= lb ? na : nb;
  Node nd;
  nd.kind = Op::Add;
  nd.a = a.id;
  nd.b = b.id;
  nd.rank = big.rank;
  nd.d0 = big.d0;
  nd.d1 = big.d1;
  nd.requires_grad = na.requires_grad || nb.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* A = val_ptr(nodes_[a.id]);
  const double* B = val_ptr(nodes_[b.id]);
  double* Y = val_ptr(nodes_[id]);
  for (int64_t i = 0; i < n; ++i)
    Y[i] = A[la == 1 ? 0 : i] + B[lb == 1 ? 0 : i];
  return {this, id};
}

Var Tape::sub(Var a, Var b) {
  require_same_tape(a, "sub");
  require_same_tape(b, "sub");
  const Node& na = node(a.id);
  const Node& nb = node(b.id);
  const int64_t la = node_numel(na), lb = node_numel(nb);
  const bool same = na.d0 == nb.d0 && na.d1 == nb.d1 && na.rank == nb.rank;
  if (!same && la != 1 && lb != 1)
    shape_error(Op::Sub, shape_of(a.id), shape_of(b.id));
  const Node& big = la >= lb ? na : nb;
  Node nd;
  nd.kind = Op::Sub;
  nd.a = a.id;
  nd.b = b.id;
  nd.rank = big.rank;
  nd.d0 = big.d0;
  nd.d1 = big.d1;
  nd.requires_grad = na.requires_grad || nb.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* A = val_ptr(nodes_[a.id]);
  const double* B = val_ptr(nodes_[b.id]);
  double* Y = val_ptr(nodes_[id]);
  for (int64_t i = 0; i < n; ++i)
    Y[i] = A[la == 1 ? 0 : i] - B[lb == 1 ? 0 : i];
  return {this, id};
}

Var Tape::mul(Var a, Var b) {
  require_same_tape(a, "mul");
  require_same_tape(b, "mul");
  const Node& na = node(a.id);
  const Node& nb = node(b.id);
  const int64_t la = node_numel(na), lb = node_numel(nb);
  const bool same = na.d0 == nb.d0 && na.d1 == nb.d1 && na.rank == nb.rank;
  if (!same && la != 1 && lb != 1)
    shape_error(Op::Mul, shape_of(a.id), shape_of(b.id));
  const Node& big = la >= lb ? na : nb;
  Node nd;
  nd.kind = Op::Mul;
  nd.a = a.id;
  nd.b = b.id;
  nd.rank = big.rank;
  nd.d0 = big.d0;
  nd.d1 = big.d1;
  nd.requires_grad = na.requires_grad || nb.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* A = val_ptr(nodes_[a.id]);
  const double* B = val_ptr(nodes_[b.id]);
  double* Y = val_ptr(nodes_[id]);
  for (int64_t i = 0; i < n; ++i)
    Y[i] = A[la == 1 ? 0 : i] * B[lb == 1 ? 0 : i];
  return {this, id};
}

Var Tape::unary_elementwise(Op kind, Var x) {
  require_same_tape(x, op_name(kind));
  const Node& nx = node(x.id);
  Node nd;
  nd.kind = kind;
  nd.a = x.id;
  nd.rank = nx.rank;
  nd.d0 = nx.d0;
  nd.d1 = nx.d1;
  nd.requires_grad = nx.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  switch (kind) {
    case Op::Tanh:
      for (int64_t i = 0; i < n; ++i) Y[i] = std::tanh(X[i]);
      break;
    case Op::Sigmoid:
      for (int64_t i = 0; i < n; ++i) Y[i] = 1.0 / (1.0 + std::exp(-X[i]));
      break;
    case Op::Relu:
      for (int64_t i = 0; i < n; ++i) Y[i] = X[i] > 0.0 ? X[i] : 0.0;
      break;
    case Op::SignedSqrt:
      for (int64_t i = 0; i < n; ++i) {
        const double s = std::sqrt(std::fabs(X[i]));
        Y[i] = X[i] < 0.0 ? -s : s;
      }
      break;
    case Op::Log:
      for (int64_t i = 0; i < n; ++i) {
        if (X[i] <= 0.0)
          throw std::domain_error("log: non-positive input " +
                                  std::to_string(X[i]));
        Y[i] = std::log(X[i]);
      }
      break;
    default:
      throw std::invalid_argument("unary_elementwise: bad kind");
  }
  return {this, id};
}

Var Tape::tanh(Var x) { return unary_elementwise(Op::Tanh, x); }
Var Tape::sigmoid(Var x) { return unary_elementwise(Op::Sigmoid, x); }
Var Tape::relu(Var x) { return unary_elementwise(Op::Relu, x); }
Var Tape::signed_sqrt(Var x) { return unary_elementwise(Op::SignedSqrt, x); }
Var Tape::log(Var x) { return unary_elementwise(Op::Log, x); }

Var Tape::softmax(Var x, int axis) {
  require_same_tape(x, "softmax");
  const Node& nx = node(x.id);
  if (axis < 0 || axis >= nx.rank)
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for " +
                                shape_str(shape_of(x.id)));
  Node nd;
  nd.kind = Op::Softmax;
  nd.a = x.id;
  nd.rank = nx.rank;
  nd.d0 = nx.d0;
  nd.d1 = nx.d1;
  nd.i0 = axis;
  nd.requires_grad = nx.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  const Node& out = nodes_[id];
  const int64_t slices = out.rank == 1 ? 1 : (axis == 1 ? out.d0 : out.d1);
  const int64_t len = out.rank == 1 ? out.d0 : (axis == 1 ? out.d1 : out.d0);
  const int64_t stride = out.rank == 1 ? 1 : (axis == 1 ? 1 : out.d1);
  for (int64_t s = 0; s < slices; ++s) {
    const int64_t base = out.rank == 1 ? 0 : (axis == 1 ? s * out.d1 : s);
    double mx = X[base];
    for (int64_t i = 1; i < len; ++i) mx = std::max(mx, X[base + i * stride]);
    double z = 0.0;
    for (int64_t i = 0; i < len; ++i) {
      const double e = std::exp(X[base + i * stride] - mx);
      Y[base + i * stride] = e;
      z += e;
    }
    for (int64_t i = 0; i < len; ++i) Y[base + i * stride] /= z;
  }
  return {this, id};
}

Var Tape::l2_normalize(Var x) {
  require_same_tape(x, "l2_normalize");
  const Node& nx = node(x.id);
  if (nx.rank != 1)
    throw std::invalid_argument("l2_normalize: expected rank-1, got " +
                                shape_str(shape_of(x.id)));
  Node nd;
  nd.kind = Op::L2Normalize;
  nd.a = x.id;
  nd.rank = 1;
  nd.d0 = nx.d0;
  nd.requires_grad = nx.requires_grad;
  alloc_saved(nd, 1);
  const int64_t n = nd.d0;
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  double sq = 0.0;
  for (int64_t i = 0; i < n; ++i) sq += X[i] * X[i];
  const double norm = std::sqrt(sq);
  saved_buf_[nodes_[id].saved_off] = norm;
  const double denom = norm + 1e-8;
  for (int64_t i = 0; i < n; ++i) Y[i] = X[i] / denom;
  return {this, id};
}

Var Tape::concat(std::span<const Var> xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no operands");
  if (axis != 0)
    throw std::invalid_argument(
        "concat: only axis 0 over rank-1 operands is supported");
  int64_t total = 0;
  for (Var v : xs) {
    require_same_tape(v, "concat");
    const Node& nv = node(v.id);
    if (nv.rank != 1)
      throw std::invalid_argument("concat: expected rank-1, got " +
                                  shape_str(shape_of(v.id)));
    total += nv.d0;
  }
  Node nd;
  nd.kind = Op::Concat;
  nd.rank = 1;
  nd.d0 = static_cast<int>(total);
  nd.in_off = static_cast<int>(input_pool_.size());
  nd.in_n = static_cast<int>(xs.size());
  for (Var v : xs) {
    input_pool_.push_back(v.id);
    nd.requires_grad = nd.requires_grad || node(v.id).requires_grad;
  }
  const int id = push_node(nd, total);
  double* Y = val_ptr(nodes_[id]);
  int64_t off = 0;
  for (Var v : xs) {
    const Node& nv = nodes_[v.id];
    const double* X = val_ptr(nv);
    std::copy(X, X + nv.d0, Y + off);
    off += nv.d0;
  }
  return {this, id};
}

Var Tape::cross_entropy_logits(Var logits, int label) {
  require_same_tape(logits, "cross_entropy_logits");
  const Node& nx = node(logits.id);
  if (nx.rank != 1)
    throw std::invalid_argument(
        "cross_entropy_logits: expected rank-1 logits, got " +
        shape_str(shape_of(logits.id)));
  if (label < 0 || label >= nx.d0)
    throw std::invalid_argument("cross_entropy_logits: label " +
                                std::to_string(label) +
                                " out of range for " + shape_str(shape_of(logits.id)));
  const int64_t n = nx.d0;
  Node nd;
  nd.kind = Op::CrossEntropyLogits;
  nd.a = logits.id;
  nd.rank = 1;
  nd.d0 = 1;
  nd.i0 = label;
  nd.requires_grad = nx.requires_grad;
  alloc_saved(nd, static_cast<int>(n));
  const int id = push_node(nd, 1);
  const double* X = val_ptr(nodes_[logits.id]);
  double mx = X[0];
  for (int64_t i = 1; i < n; ++i) mx = std::max(mx, X[i]);
  double z = 0.0;
  double* probs = saved_buf_.data() + nodes_[id].saved_off;
  for (int64_t i = 0; i < n; ++i) {
    probs[i] = std::exp(X[i] - mx);
    z += probs[i];
  }
  for (int64_t i = 0; i < n; ++i) probs[i] /= z;
  *val_ptr(nodes_[id]) = std::log(z) + mx - X[label];
  return {this, id};
}

Var Tape::mean(Var x) {
  require_same_tape(x, "mean");
  const Node& nx = node(x.id);
  Node nd;
  nd.kind = Op::Mean;
  nd.a = x.id;
  nd.rank = 1;
  nd.d0 = 1;
  nd.requires_grad = nx.requires_grad;
  const int id = push_node(nd, 1);
  const double* X = val_ptr(nodes_[x.id]);
  const int64_t n = node_numel(nodes_[x.id]);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += X[i];
  *val_ptr(nodes_[id]) = acc / static_cast<double>(n);
  return {this, id};
}

Var Tape::sum(Var x) {
  require_same_tape(x, "sum");
  const Node& nx = node(x.id);
  Node nd;
  nd.kind = Op::Sum;
  nd.a = x.id;
  nd.rank = 1;
  nd.d0 = 1;
  nd.requires_grad = nx.requires_grad;
  const int id = push_node(nd, 1);
  const double* X = val_ptr(nodes_[x.id]);
  const int64_t n = node_numel(nodes_[x.id]);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += X[i];
  *val_ptr(nodes_[id]) = acc;
  return {this, id};
}

Var Tape::scale(Var x, double c) {
  require_same_tape(x, "scale");
  const Node& nx = node(x.id);
  Node nd;
  nd.kind = Op::Scale;
  nd.a = x.id;
  nd.rank = nx.rank;
  nd.d0 = nx.d0;
  nd.d1 = nx.d1;
  nd.s0 = c;
  nd.requires_grad = nx.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  for (int64_t i = 0; i < n; ++i) Y[i] = X[i] * c;
  return {this, id};
}

Var Tape::add_scalar(Var x, double c) {
  require_same_tape(x, "add_scalar");
  const Node& nx = node(x.id);
  Node nd;
  nd.kind = Op::AddScalar;
  nd.a = x.id;
  nd.rank = nx.rank;
  nd.d0 = nx.d0;
  nd.d1 = nx.d1;
  nd.s0 = c;
  nd.requires_grad = nx.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  for (int64_t i = 0; i < n; ++i) Y[i] = X[i] + c;
  return {this, id};
}

Var Tape::clamp(Var x, double lo, double hi) {
  require_same_tape(x, "clamp");
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  const Node& nx = node(x.id);
  Node nd;
  nd.kind = Op::Clamp;
  nd.a = x.id;
  nd.rank = nx.rank;
  nd.d0 = nx.d0;
  nd.d1 = nx.d1;
  nd.s0 = lo;
  nd.s1 = hi;
  nd.requires_grad = nx.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  for (int64_t i = 0; i < n; ++i) Y[i] = std::min(std::max(X[i], lo), hi);
  return {this, id};
}

Var Tape::slice(Var x, int from, int to) {
  require_same_tape(x, "slice");
  const Node& nx = node(x.id);
  if (nx.rank != 1)
    throw std::invalid_argument("slice: expected rank-1, got " +
                                shape_str(shape_of(x.id)));
  if (from < 0 || to > nx.d0 || from >= to)
    throw std::invalid_argument("slice: bounds [" + std::to_string(from) +
                                "," + std::to_string(to) + ") invalid for " +
                                shape_str(shape_of(x.id)));
  Node nd;
  nd.kind = Op::Slice;
  nd.a = x.id;
  nd.rank = 1;
  nd.d0 = to - from;
  nd.i0 = from;
  nd.i1 = to;
  nd.requires_grad = nx.requires_grad;
  const int id = push_node(nd, nd.d0);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  std::copy(X + from, X + to, Y);
  return {this, id};
}

Var Tape::take_row(Var m, int row) {
  require_same_tape(m, "take_row");
  const Node& nm = node(m.id);
  if (nm.rank != 2)
    throw std::invalid_argument("take_row: expected rank-2, got " +
                                shape_str(shape_of(m.id)));
  if (row < 0 || row >= nm.d0)
    throw std::invalid_argument("take_row: row " + std::to_string(row) +
                                " out of range for " + shape_str(shape_of(m.id)));
  const int64_t cols = nm.d1;
  Node nd;
  nd.kind = Op::TakeRow;
  nd.a = m.id;
  nd.rank = 1;
  nd.d0 = static_cast<int>(cols);
  nd.i0 = row;
  nd.requires_grad = nm.requires_grad;
  const int id = push_node(nd, cols);
  const double* X = val_ptr(nodes_[m.id]);
  double* Y = val_ptr(nodes_[id]);
  std::copy(X + row * cols, X + (row + 1) * cols, Y);
  return {this, id};
}

Var Tape::reshape(Var x, const Shape& s) {
  require_same_tape(x, "reshape");
  if (s.empty() || s.size() > 2)
    throw std::invalid_argument("reshape: tape supports rank 1 and 2, got " +
                                shape_str(s));
  const Node& nx = node(x.id);
  if (numel(s) != node_numel(nx))
    throw std::invalid_argument("reshape: element count mismatch " +
                                shape_str(shape_of(x.id)) + " vs " + shape_str(s));
  Node nd;
  nd.kind = Op::Reshape;
  nd.a = x.id;
  nd.rank = static_cast<std::uint8_t>(s.size());
  nd.d0 = s[0];
  nd.d1 = nd.rank == 2 ? s[1] : 1;
  nd.requires_grad = nx.requires_grad;
  const int64_t n = node_numel(nd);
  const int id = push_node(nd, n);
  const double* X = val_ptr(nodes_[x.id]);
  double* Y = val_ptr(nodes_[id]);
  std::copy(X, X + n, Y);
  return {this, id};
}

Var Tape::apply(Op kind, std::span<const Var> operands) {
  auto need = [&](std::size_t n) {
    if (operands.size() != n)
      throw std::invalid_argument(std::string("apply: ") + op_name(kind) +
                                  " expects " + std::to_string(n) +
                                  " operands, got " +
                                  std::to_string(operands.size()));
  };
  switch (kind) {
    case Op::MatMul: need(2); return matmul(operands[0], operands[1]);
    case Op::Add: need(2); return add(operands[0], operands[1]);
    case Op::Sub: need(2); return sub(operands[0], operands[1]);
    case Op::Mul: need(2); return mul(operands[0], operands[1]);
    case Op::Tanh: need(1); return tanh(operands[0]);
    case Op::Sigmoid: need(1); return sigmoid(operands[0]);
    case Op::Relu: need(1); return relu(operands[0]);
    case Op::SignedSqrt: need(1); return signed_sqrt(operands[0]);
    case Op::L2Normalize: need(1); return l2_normalize(operands[0]);
    case Op::Log: need(1); return log(operands[0]);
    case Op::Mean: need(1); return mean(operands[0]);
    case Op::Sum: need(1); return sum(operands[0]);
    case Op::Softmax: need(1); return softmax(operands[0], 0);
    case Op::Concat: return concat(operands, 0);
    default:
      throw std::invalid_argument(std::string("apply: ") + op_name(kind) +
                                  " requires its dedicated builder");
  }
}

void Tape::backward(Var root) {
  require_same_tape(root, "backward");
  const Node& r = node(root.id);
  if (node_numel(r) != 1)
    throw std::invalid_argument("backward: root must be a scalar, got " +
                                shape_str(shape_of(root.id)));
  adj_buf_.assign(val_buf_.size(), 0.0);
  adj_buf_[r.val_off] = 1.0;
  for (int id = root.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.kind == Op::Leaf) continue;
    backward_node(id);
  }
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  const double* G = adj_buf_.data() + n.val_off;
  const int64_t out_n = node_numel(n);
  auto adj_of = [&](int in) -> double* {
    return adj_buf_.data() + nodes_[in].val_off;
  };
  auto val_of = [&](int in) -> const double* {
    return val_buf_.data() + nodes_[in].val_off;
  };
  auto rg = [&](int in) { return nodes_[in].requires_grad; };

  switch (n.kind) {
    case Op::MatMul: {
      const Node& na = nodes_[n.a];
      const Node& nb = nodes_[n.b];
      const int64_t m = na.d0, k = na.d1;
      const int64_t cols = nb.rank == 2 ? nb.d1 : 1;
      const double* A = val_of(n.a);
      const double* B = val_of(n.b);
      if (rg(n.a)) {
        double* dA = adj_of(n.a);
        for (int64_t i = 0; i < m; ++i)
          for (int64_t p = 0; p < k; ++p) {
            const double* Bp = B + p * cols;
            const double* Gi = G + i * cols;
            double acc = 0.0;
            for (int64_t j = 0; j < cols; ++j) acc += Gi[j] * Bp[j];
            dA[i * k + p] += acc;
          }
      }
      if (rg(n.b)) {
        double* dB = adj_of(n.b);
        for (int64_t i = 0; i < m; ++i) {
          const double* Gi = G + i * cols;
          const double* Ai = A + i * k;
          for (int64_t p = 0; p < k; ++p) {
            const double aip = Ai[p];
            double* dBp = dB + p * cols;
            for (int64_t j = 0; j < cols; ++j) dBp[j] += aip * Gi[j];
          }
        }
      }
      break;
    }
    case Op::Add:
    case Op::Sub: {
      const double sgn = n.kind == Op::Sub ? -1.0 : 1.0;
      const int64_t la = node_numel(nodes_[n.a]);
      const int64_t lb = node_numel(nodes_[n.b]);
      if (rg(n.a)) {
        double* dA = adj_of(n.a);
        if (la == out_n)
          for (int64_t i = 0; i < out_n; ++i) dA[i] += G[i];
        else
          for (int64_t i = 0; i < out_n; ++i) dA[0] += G[i];
      }
      if (rg(n.b)) {
        double* dB = adj_of(n.b);
        if (lb == out_n)
          for (int64_t i = 0; i < out_n; ++i) dB[i] += sgn * G[i];
        else
          for (int64_t i = 0; i < out_n; ++i) dB[0] += sgn * G[i];
      }
      break;
    }
    case Op::Mul: {
      const int64_t la = node_numel(nodes_[n.a]);
      const int64_t lb = node_numel(nodes_[n.b]);
      const double* A = val_of(n.a);
      const double* B = val_of(n.b);
      if (rg(n.a)) {
        double* dA = adj_of(n.a);
        for (int64_t i = 0; i < out_n; ++i)
          dA[la == 1 ? 0 : i] += G[i] * B[lb == 1 ? 0 : i];
      }
      if (rg(n.b)) {
        double* dB = adj_of(n.b);
        for (int64_t i = 0; i < out_n; ++i)
          dB[lb == 1 ? 0 : i] += G[i] * A[la == 1 ? 0 : i];
      }
      break;
    }
    case Op::Tanh: {
      const double* Y = val_ptr(n);
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[i] += G[i] * (1.0 - Y[i] * Y[i]);
      break;
    }
    case Op::Sigmoid: {
      const double* Y = val_ptr(n);
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[i] += G[i] * Y[i] * (1.0 - Y[i]);
      break;
    }
    case Op::Relu: {
      const double* X = val_of(n.a);
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i)
        if (X[i] > 0.0) dX[i] += G[i];
      break;
    }
    case Op::SignedSqrt: {
      const double* Y = val_ptr(n);
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i)
        dX[i] += G[i] / (2.0 * std::max(std::fabs(Y[i]), 1e-6));
      break;
    }
    case Op::Softmax: {
      const double* Y = val_ptr(n);
      double* dX = adj_of(n.a);
      const int axis = n.i0;
      const int64_t slices = n.rank == 1 ? 1 : (axis == 1 ? n.d0 : n.d1);
      const int64_t len = n.rank == 1 ? n.d0 : (axis == 1 ? n.d1 : n.d0);
      const int64_t stride = n.rank == 1 ? 1 : (axis == 1 ? 1 : n.d1);
      for (int64_t s = 0; s < slices; ++s) {
        const int64_t base = n.rank == 1 ? 0 : (axis == 1 ? s * n.d1 : s);
        double dot = 0.0;
        for (int64_t i = 0; i < len; ++i)
          dot += G[base + i * stride] * Y[base + i * stride];
        for (int64_t i = 0; i < len; ++i) {
          const int64_t at = base + i * stride;
          dX[at] += Y[at] * (G[at] - dot);
        }
      }
      break;
    }
    case Op::L2Normalize: {
      const double* X = val_of(n.a);
      double* dX = adj_of(n.a);
      const double norm = saved_ptr(n)[0];
      const double denom = norm + 1e-8;
      double dot = 0.0;
      for (int64_t i = 0; i < out_n; ++i) dot += G[i] * X[i];
      const double corr =
          norm > 1e-12 ? dot / (norm * denom * denom) : 0.0;
      for (int64_t i = 0; i < out_n; ++i)
        dX[i] += G[i] / denom - corr * X[i];
      break;
    }
    case Op::Concat: {
      int64_t off = 0;
      for (int j = 0; j < n.in_n; ++j) {
        const int in = input_pool_[n.in_off + j];
        const int64_t len = node_numel(nodes_[in]);
        if (rg(in)) {
          double* dX = adj_of(in);
          for (int64_t i = 0; i < len; ++i) dX[i] += G[off + i];
        }
        off += len;
      }
      break;
    }
    case Op::Log: {
      const double* X = val_of(n.a);
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[i] += G[i] / X[i];
      break;
    }
    case Op::CrossEntropyLogits: {
      const double* probs = saved_ptr(n);
      double* dX = adj_of(n.a);
      const int64_t len = node_numel(nodes_[n.a]);
      const double g = G[0];
      for (int64_t i = 0; i < len; ++i) dX[i] += g * probs[i];
      dX[n.i0] -= g;
      break;
    }
    case Op::Mean: {
      double* dX = adj_of(n.a);
      const int64_t len = node_numel(nodes_[n.a]);
      const double g = G[0] / static_cast<double>(len);
      for (int64_t i = 0; i < len; ++i) dX[i] += g;
      break;
    }
    case Op::Sum: {
      double* dX = adj_of(n.a);
      const int64_t len = node_numel(nodes_[n.a]);
      for (int64_t i = 0; i < len; ++i) dX[i] += G[0];
      break;
    }
    case Op::Scale: {
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[i] += G[i] * n.s0;
      break;
    }
    case Op::AddScalar: {
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[i] += G[i];
      break;
    }
    case Op::Clamp: {
      const double* X = val_of(n.a);
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i)
        if (X[i] > n.s0 && X[i] < n.s1) dX[i] += G[i];
      break;
    }
    case Op::Slice: {
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[n.i0 + i] += G[i];
      break;
    }
    case Op::TakeRow: {
      double* dX = adj_of(n.a);
      const int64_t cols = nodes_[n.a].d1;
      for (int64_t i = 0; i < cols; ++i)
        dX[static_cast<int64_t>(n.i0) * cols + i] += G[i];
      break;
    }
    case Op::Reshape: {
      double* dX = adj_of(n.a);
      for (int64_t i = 0; i < out_n; ++i) dX[i] += G[i];
      break;
    }
    case Op::Leaf:
      break;
  }
}

Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
Var add(Var a, Var b) { return a.tape->add(a, b); }
Var sub(Var a, Var b) { return a.tape->sub(a, b); }
Var mul(Var a, Var b) { return a.tape->mul(a, b); }
Var tanh(Var x) { return x.tape->tanh(x); }
Var sigmoid(Var x) { return x.tape->sigmoid(x); }
Var relu(Var x) { return x.tape->relu(x); }
Var softmax(Var x, int axis) { return x.tape->softmax(x, axis); }
Var signed_sqrt(Var x) { return x.tape->signed_sqrt(x); }
Var l2_normalize(Var x) { return x.tape->l2_normalize(x); }
Var concat(std::span<const Var> xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no operands");
  return xs[0].tape->concat(xs, axis);
}
Var log(Var x) { return x.tape->log(x); }
Var cross_entropy_logits(Var logits, int label) {
  return logits.tape->cross_entropy_logits(logits, label);
}
Var mean(Var x) { return x.tape->mean(x); }
Var sum(Var x) { return x.tape->sum(x); }
Var scale(Var x, double c) { return x.tape->scale(x, c); }
Var add_scalar(Var x, double c) { return x.tape->add_scalar(x, c); }
Var clamp(Var x, double lo, double hi) { return x.tape->clamp(x, lo, hi); }
Var slice(Var x, int from, int to) { return x.tape->slice(x, from, to); }
Var take_row(Var m, int row) { return m.tape->take_row(m, row); }
Var reshape(Var x, const Shape& s) { return x.tape->reshape(x, s); }

}  // namespace ccm::ad
