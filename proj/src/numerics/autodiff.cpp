// SPDX-License-Identifier: Apache-2.0
#include "gbn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gbn/kernels.hpp"

namespace gbn {
namespace {

[[noreturn]] void shape_error(Op op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch " +
                              a.str() + " vs " + b.str());
}

[[noreturn]] void shape_error(Op op, const Shape& a, const std::string& why) {
  throw std::invalid_argument(std::string(op_name(op)) + ": " + why +
                              " (got " + a.str() + ")");
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.ptr();
  const double* s = src.ptr();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::param: return "param";
    case Op::matmul: return "matmul";
    case Op::affine: return "affine";
    case Op::add: return "add";
    case Op::add_rows: return "add_rows";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::one_minus: return "one_minus";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::log: return "log";
    case Op::softmax: return "softmax";
    case Op::log_softmax: return "log_softmax";
    case Op::embedding: return "embedding";
    case Op::concat: return "concat";
    case Op::pick: return "pick";
    case Op::slice: return "slice";
    case Op::stack_rows: return "stack_rows";
    case Op::transpose: return "transpose";
    case Op::sum: return "sum";
    case Op::add_n: return "add_n";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("Var: use of an empty handle");
  if (generation_ != tape_->generation_)
    throw std::logic_error("Var: stale tape (handle predates reset)");
  return tape_->value_at(index_);
}

bool Var::requires_grad() const {
  return tape_ && tape_->nodes_[index_].requires_grad;
}

std::uint32_t Tape::check(Var v, const char* op) const {
  if (v.tape_ != this)
    throw std::logic_error(std::string(op) + ": Var belongs to another tape");
  if (v.generation_ != generation_)
    throw std::logic_error(std::string(op) + ": stale tape");
  return v.index_;
}

Var Tape::push(Node&& n) {
  if (backward_done_)
    throw std::logic_error("Tape: recording after backward without reset");
  if (record_gradients_ && n.op != Op::constant && !n.requires_grad) {
    for (std::size_t k = 0; k < n.n_in; ++k)
      n.requires_grad = n.requires_grad || nodes_[n.in[k]].requires_grad;
    for (std::uint32_t k : n.many)
      n.requires_grad = n.requires_grad || nodes_[k].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Tape::constant(Tensor t) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(t);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.op = Op::param;
  n.param = &p;
  n.requires_grad = record_gradients_;
  if (record_gradients_ && p.grad.shape() != p.value.shape())
    p.grad = Tensor::zeros_like(p.value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const std::uint32_t ia = check(a, "matmul"), ib = check(b, "matmul");
  const Tensor& A = value_at(ia);
  const Tensor& B = value_at(ib);
  const auto& k = kernels::active();
  Node n;
  n.op = Op::matmul;
  n.n_in = 2;
  n.in = {ia, ib, 0};
  if (A.rank() == 2 && B.rank() == 1) {
    if (A.cols() != B.size()) shape_error(Op::matmul, A.shape(), B.shape());
    n.value = Tensor(Shape{A.rows()});
    k.gemv(A.ptr(), B.ptr(), n.value.ptr(), A.rows(), A.cols());
  } else if (A.rank() == 2 && B.rank() == 2) {
    if (A.cols() != B.rows()) shape_error(Op::matmul, A.shape(), B.shape());
    const std::size_t m = A.rows(), kk = A.cols(), cols = B.cols();
    n.value = Tensor(Shape{m, cols});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < kk; ++p)
        k.axpy(A.at(i, p), B.ptr() + p * cols, n.value.ptr() + i * cols, cols);
  } else if (A.rank() == 1 && B.rank() == 1) {
    if (A.size() != B.size()) shape_error(Op::matmul, A.shape(), B.shape());
    n.value = Tensor::scalar(k.dot(A.ptr(), B.ptr(), A.size()));
  } else if (A.rank() == 1 && B.rank() == 2) {
    if (A.size() != B.rows()) shape_error(Op::matmul, A.shape(), B.shape());
    n.value = Tensor(Shape{B.cols()});
    k.gemv_t_acc(B.ptr(), A.ptr(), n.value.ptr(), B.rows(), B.cols());
  } else {
    shape_error(Op::matmul, A.shape(), B.shape());
  }
  return push(std::move(n));
}

Var Tape::affine(Var w, Var x, Var b) {
  const std::uint32_t iw = check(w, "affine"), ix = check(x, "affine"),
                      ib = check(b, "affine");
  const Tensor& W = value_at(iw);
  const Tensor& X = value_at(ix);
  const Tensor& B = value_at(ib);
  if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.size())
    shape_error(Op::affine, W.shape(), X.shape());
  if (B.rank() != 1 || B.size() != W.rows())
    shape_error(Op::affine, W.shape(), B.shape());
  Node n;
  n.op = Op::affine;
  n.n_in = 3;
  n.in = {iw, ix, ib};
  n.value = Tensor(Shape{W.rows()});
  kernels::active().gemv(W.ptr(), X.ptr(), n.value.ptr(), W.rows(), W.cols());
  kernels::active().add(n.value.ptr(), B.ptr(), n.value.ptr(), B.size());
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const std::uint32_t ia = check(a, "add"), ib = check(b, "add");
  const Tensor& A = value_at(ia);
  const Tensor& B = value_at(ib);
  if (A.shape() != B.shape()) shape_error(Op::add, A.shape(), B.shape());
  Node n;
  n.op = Op::add;
  n.n_in = 2;
  n.in = {ia, ib, 0};
  n.value = Tensor(A.shape());
  kernels::active().add(A.ptr(), B.ptr(), n.value.ptr(), A.size());
  return push(std::move(n));
}

Var Tape::add_rows(Var m, Var v) {
  const std::uint32_t im = check(m, "add_rows"), iv = check(v, "add_rows");
  const Tensor& M = value_at(im);
  const Tensor& V = value_at(iv);
  if (M.rank() != 2 || V.rank() != 1 || M.cols() != V.size())
    shape_error(Op::add_rows, M.shape(), V.shape());
  Node n;
  n.op = Op::add_rows;
  n.n_in = 2;
  n.in = {im, iv, 0};
  n.value = Tensor(M.shape());
  for (std::size_t r = 0; r < M.rows(); ++r)
    kernels::active().add(M.ptr() + r * M.cols(), V.ptr(),
                          n.value.ptr() + r * M.cols(), M.cols());
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const std::uint32_t ia = check(a, "sub"), ib = check(b, "sub");
  const Tensor& A = value_at(ia);
  const Tensor& B = value_at(ib);
  if (A.shape() != B.shape()) shape_error(Op::sub, A.shape(), B.shape());
  Node n;
  n.op = Op::sub;
  n.n_in = 2;
  n.in = {ia, ib, 0};
  n.value = Tensor(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = A[i] - B[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const std::uint32_t ia = check(a, "mul"), ib = check(b, "mul");
  const Tensor& A = value_at(ia);
  const Tensor& B = value_at(ib);
  if (A.shape() != B.shape()) shape_error(Op::mul, A.shape(), B.shape());
  Node n;
  n.op = Op::mul;
  n.n_in = 2;
  n.in = {ia, ib, 0};
  n.value = Tensor(A.shape());
  kernels::active().mul(A.ptr(), B.ptr(), n.value.ptr(), A.size());
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  const std::uint32_t ia = check(a, "scale");
  const Tensor& A = value_at(ia);
  Node n;
  n.op = Op::scale;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.factor = c;
  n.value = Tensor(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = c * A[i];
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  const std::uint32_t ia = check(a, "one_minus");
  const Tensor& A = value_at(ia);
  Node n;
  n.op = Op::one_minus;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = 1.0 - A[i];
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  const std::uint32_t ia = check(a, "sigmoid");
  const Tensor& A = value_at(ia);
  Node n;
  n.op = Op::sigmoid;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double x = A[i];
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0) {
      n.value[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      n.value[i] = e / (1.0 + e);
    }
  }
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  const std::uint32_t ia = check(a, "tanh");
  const Tensor& A = value_at(ia);
  Node n;
  n.op = Op::tanh;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = std::tanh(A[i]);
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const std::uint32_t ia = check(a, "log");
  const Tensor& A = value_at(ia);
  Node n;
  n.op = Op::log;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i)
    n.value[i] = std::log(std::max(A[i], kLogFloor));
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  const std::uint32_t ia = check(a, "softmax");
  const Tensor& A = value_at(ia);
  if (A.rank() == 0 || A.rank() > 2)
    shape_error(Op::softmax, A.shape(), "expects rank 1 or 2");
  Node n;
  n.op = Op::softmax;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor(A.shape());
  const std::size_t cols = A.cols();
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const double* z = A.ptr() + r * cols;
    double* y = n.value.ptr() + r * cols;
    const double mx = *std::max_element(z, z + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (y[c] = std::exp(z[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
  return push(std::move(n));
}

Var Tape::log_softmax(Var a, TokenMask mask) {
  const std::uint32_t ia = check(a, "log_softmax");
  const Tensor& A = value_at(ia);
  if (A.rank() != 1) shape_error(Op::log_softmax, A.shape(), "expects rank 1");
  if (mask && mask->size() != A.size())
    shape_error(Op::log_softmax, A.shape(), "mask length mismatch");
  const std::size_t cols = A.size();
  auto banned = [&](std::size_t c) { return mask && (*mask)[c] != 0; };
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cols; ++c)
    if (!banned(c)) mx = std::max(mx, A[c]);
  if (!std::isfinite(mx))
    shape_error(Op::log_softmax, A.shape(), "every entry masked or non-finite");
  double total = 0.0;
  for (std::size_t c = 0; c < cols; ++c)
    if (!banned(c)) total += std::exp(A[c] - mx);
  const double lse = mx + std::log(total);
  Node n;
  n.op = Op::log_softmax;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor(A.shape());
  for (std::size_t c = 0; c < cols; ++c)
    n.value[c] = banned(c) ? kMaskedLogProb : A[c] - lse;
  n.mask = std::move(mask);
  return push(std::move(n));
}

Var Tape::embedding(Var table, std::size_t index) {
  const std::uint32_t it = check(table, "embedding");
  const Tensor& T = value_at(it);
  if (T.rank() != 2) shape_error(Op::embedding, T.shape(), "expects a matrix");
  if (index >= T.rows())
    throw std::out_of_range("embedding: index " + std::to_string(index) +
                            " out of range for table " + T.shape().str());
  Node n;
  n.op = Op::embedding;
  n.n_in = 1;
  n.in = {it, 0, 0};
  n.aux = index;
  n.value = Tensor(Shape{T.cols()});
  std::copy_n(T.ptr() + index * T.cols(), T.cols(), n.value.ptr());
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Node n;
  n.op = Op::concat;
  std::size_t total = 0;
  for (Var v : parts) {
    const std::uint32_t i = check(v, "concat");
    const Tensor& t = value_at(i);
    if (t.rank() != 1) shape_error(Op::concat, t.shape(), "expects rank-1 parts");
    total += t.size();
    n.many.push_back(i);
  }
  n.value = Tensor(Shape{total});
  std::size_t off = 0;
  for (std::uint32_t i : n.many) {
    const Tensor& t = value_at(i);
    std::copy_n(t.ptr(), t.size(), n.value.ptr() + off);
    off += t.size();
  }
  return push(std::move(n));
}

Var Tape::pick(Var a, std::size_t index) {
  const std::uint32_t ia = check(a, "pick");
  const Tensor& A = value_at(ia);
  if (A.rank() != 1) shape_error(Op::pick, A.shape(), "expects rank 1");
  if (index >= A.size())
    throw std::out_of_range("pick: index " + std::to_string(index) +
                            " out of range for " + A.shape().str());
  Node n;
  n.op = Op::pick;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.aux = index;
  n.value = Tensor::scalar(A[index]);
  return push(std::move(n));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  const std::uint32_t ia = check(a, "slice");
  const Tensor& A = value_at(ia);
  if (A.rank() != 1 || length == 0 || offset + length > A.size())
    shape_error(Op::slice, A.shape(),
                "range [" + std::to_string(offset) + ", " +
                    std::to_string(offset + length) + ") invalid");
  Node n;
  n.op = Op::slice;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.aux = offset;
  n.value = Tensor(Shape{length});
  std::copy_n(A.ptr() + offset, length, n.value.ptr());
  return push(std::move(n));
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  Node n;
  n.op = Op::stack_rows;
  std::size_t width = 0;
  for (Var v : rows) {
    const std::uint32_t i = check(v, "stack_rows");
    const Tensor& t = value_at(i);
    if (t.rank() != 1) shape_error(Op::stack_rows, t.shape(), "expects rank-1 rows");
    if (width == 0) width = t.size();
    if (t.size() != width) shape_error(Op::stack_rows, t.shape(), "ragged rows");
    n.many.push_back(i);
  }
  n.value = Tensor(Shape{rows.size(), width});
  for (std::size_t r = 0; r < n.many.size(); ++r)
    std::copy_n(value_at(n.many[r]).ptr(), width, n.value.ptr() + r * width);
  return push(std::move(n));
}

Var Tape::transpose(Var m) {
  const std::uint32_t im = check(m, "transpose");
  const Tensor& M = value_at(im);
  if (M.rank() != 2) shape_error(Op::transpose, M.shape(), "expects a matrix");
  Node n;
  n.op = Op::transpose;
  n.n_in = 1;
  n.in = {im, 0, 0};
  n.value = Tensor(Shape{M.cols(), M.rows()});
  for (std::size_t r = 0; r < M.rows(); ++r)
    for (std::size_t c = 0; c < M.cols(); ++c)
      n.value[c * M.rows() + r] = M.at(r, c);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const std::uint32_t ia = check(a, "sum");
  const Tensor& A = value_at(ia);
  double s = 0.0;
  for (double x : A.data()) s += x;
  Node n;
  n.op = Op::sum;
  n.n_in = 1;
  n.in = {ia, 0, 0};
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Tape::add_n(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("add_n: no inputs");
  Node n;
  n.op = Op::add_n;
  for (Var v : terms) n.many.push_back(check(v, "add_n"));
  const Tensor& first = value_at(n.many[0]);
  n.value = Tensor(first.shape());
  for (std::uint32_t i : n.many) {
    const Tensor& t = value_at(i);
    if (t.shape() != first.shape()) shape_error(Op::add_n, first.shape(), t.shape());
    accumulate(n.value, t);
  }
  return push(std::move(n));
}

Tensor& Tape::grad_at(std::uint32_t i) {
  Node& n = nodes_[i];
  if (n.param) return n.param->grad;
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size())
    n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  const std::uint32_t i = check(v, "grad");
  const Node& n = nodes_[i];
  if (n.param) return n.param->grad;
  static const Tensor empty;
  return n.grad.size() == n.value.size() ? n.grad : empty;
}

void Tape::backward(Var root) {
  const std::uint32_t r = check(root, "backward");
  if (!record_gradients_)
    throw std::logic_error("backward: tape was created without gradient recording");
  if (backward_done_)
    throw std::logic_error("backward: tape already consumed; reset before reuse");
  if (value_at(r).size() != 1)
    throw std::invalid_argument("backward: root must be scalar, got " +
                                value_at(r).shape().str());
  backward_done_ = true;
  if (!nodes_[r].requires_grad) return;
  grad_at(r)[0] += 1.0;
  for (std::uint32_t i = r + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || n.param || n.op == Op::constant) continue;
    if (n.grad.size() != n.value.size()) continue;  // never reached from root
    propagate(i);
  }
}

void Tape::propagate(std::uint32_t i) {
  const auto& k = kernels::active();
  // grad_at() never resizes nodes_, so references into node i stay valid.
  const Op op = nodes_[i].op;
  auto needs = [&](std::uint32_t j) { return nodes_[j].requires_grad; };
  const Tensor& g = nodes_[i].grad;
  const Tensor& y = nodes_[i].value;
  const std::uint32_t a = nodes_[i].in[0];
  const std::uint32_t b = nodes_[i].in[1];

  switch (op) {
    case Op::constant:
    case Op::param:
      break;
    case Op::matmul: {
      const Tensor& A = value_at(a);
      const Tensor& B = value_at(b);
      if (A.rank() == 2 && B.rank() == 1) {
        if (needs(a)) k.ger_acc(g.ptr(), B.ptr(), grad_at(a).ptr(), A.rows(), A.cols());
        if (needs(b)) k.gemv_t_acc(A.ptr(), g.ptr(), grad_at(b).ptr(), A.rows(), A.cols());
      } else if (A.rank() == 2 && B.rank() == 2) {
        const std::size_t m = A.rows(), kk = A.cols(), cols = B.cols();
        if (needs(a)) {
          Tensor& ga = grad_at(a);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t p = 0; p < kk; ++p)
              ga[r * kk + p] += k.dot(g.ptr() + r * cols, B.ptr() + p * cols, cols);
        }
        if (needs(b)) {
          Tensor& gb = grad_at(b);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t p = 0; p < kk; ++p)
              k.axpy(A.at(r, p), g.ptr() + r * cols, gb.ptr() + p * cols, cols);
        }
      } else if (A.rank() == 1 && B.rank() == 1) {
        const double s = g[0];
        if (needs(a)) k.axpy(s, B.ptr(), grad_at(a).ptr(), A.size());
        if (needs(b)) k.axpy(s, A.ptr(), grad_at(b).ptr(), B.size());
      } else {
        if (needs(a)) {
          Tensor& ga = grad_at(a);
          for (std::size_t p = 0; p < B.rows(); ++p)
            ga[p] += k.dot(B.ptr() + p * B.cols(), g.ptr(), B.cols());
        }
        if (needs(b)) k.ger_acc(A.ptr(), g.ptr(), grad_at(b).ptr(), B.rows(), B.cols());
      }
      break;
    }
    case Op::affine: {
      const std::uint32_t c = nodes_[i].in[2];
      const Tensor& W = value_at(a);
      const Tensor& X = value_at(b);
      if (needs(a)) k.ger_acc(g.ptr(), X.ptr(), grad_at(a).ptr(), W.rows(), W.cols());
      if (needs(b)) k.gemv_t_acc(W.ptr(), g.ptr(), grad_at(b).ptr(), W.rows(), W.cols());
      if (needs(c)) accumulate(grad_at(c), g);
      break;
    }
    case Op::add:
      if (needs(a)) accumulate(grad_at(a), g);
      if (needs(b)) accumulate(grad_at(b), g);
      break;
    case Op::add_rows: {
      if (needs(a)) accumulate(grad_at(a), g);
      if (needs(b)) {
        Tensor& gb = grad_at(b);
        const std::size_t cols = gb.size();
        for (std::size_t r = 0; r < g.size() / cols; ++r)
          k.axpy(1.0, g.ptr() + r * cols, gb.ptr(), cols);
      }
      break;
    }
    case Op::sub:
      if (needs(a)) accumulate(grad_at(a), g);
      if (needs(b)) k.axpy(-1.0, g.ptr(), grad_at(b).ptr(), g.size());
      break;
    case Op::mul:
      if (needs(a)) k.mul_acc(g.ptr(), value_at(b).ptr(), grad_at(a).ptr(), g.size());
      if (needs(b)) k.mul_acc(g.ptr(), value_at(a).ptr(), grad_at(b).ptr(), g.size());
      break;
    case Op::scale:
      if (needs(a)) k.axpy(nodes_[i].factor, g.ptr(), grad_at(a).ptr(), g.size());
      break;
    case Op::one_minus:
      if (needs(a)) k.axpy(-1.0, g.ptr(), grad_at(a).ptr(), g.size());
      break;
    case Op::sigmoid:
      if (needs(a)) {
        Tensor& ga = grad_at(a);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * y[j] * (1.0 - y[j]);
      }
      break;
    case Op::tanh:
      if (needs(a)) {
        Tensor& ga = grad_at(a);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * (1.0 - y[j] * y[j]);
      }
      break;
    case Op::log:
      if (needs(a)) {
        const Tensor& A = value_at(a);
        Tensor& ga = grad_at(a);
        for (std::size_t j = 0; j < g.size(); ++j)
          if (A[j] > kLogFloor) ga[j] += g[j] / A[j];
      }
      break;
    case Op::softmax:
      if (needs(a)) {
        Tensor& ga = grad_at(a);
        const std::size_t cols = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
          const double* yr = y.ptr() + r * cols;
          const double* gr = g.ptr() + r * cols;
          const double gy = k.dot(gr, yr, cols);
          for (std::size_t c = 0; c < cols; ++c)
            ga[r * cols + c] += yr[c] * (gr[c] - gy);
        }
      }
      break;
    case Op::log_softmax:
      if (needs(a)) {
        const TokenMask& mask = nodes_[i].mask;
        auto banned = [&](std::size_t c) { return mask && (*mask)[c] != 0; };
        double gsum = 0.0;
        for (std::size_t c = 0; c < g.size(); ++c)
          if (!banned(c)) gsum += g[c];
        Tensor& ga = grad_at(a);
        for (std::size_t c = 0; c < g.size(); ++c)
          if (!banned(c)) ga[c] += g[c] - std::exp(y[c]) * gsum;
      }
      break;
    case Op::embedding:
      if (needs(a)) {
        Tensor& gt = grad_at(a);
        k.axpy(1.0, g.ptr(), gt.ptr() + nodes_[i].aux * g.size(), g.size());
      }
      break;
    case Op::concat: {
      std::size_t off = 0;
      for (std::uint32_t j : nodes_[i].many) {
        const std::size_t len = value_at(j).size();
        if (needs(j)) k.axpy(1.0, g.ptr() + off, grad_at(j).ptr(), len);
        off += len;
      }
      break;
    }
    case Op::pick:
      if (needs(a)) grad_at(a)[nodes_[i].aux] += g[0];
      break;
    case Op::slice:
      if (needs(a)) k.axpy(1.0, g.ptr(), grad_at(a).ptr() + nodes_[i].aux, g.size());
      break;
    case Op::stack_rows: {
      const std::size_t width = y.cols();
      for (std::size_t r = 0; r < nodes_[i].many.size(); ++r) {
        const std::uint32_t j = nodes_[i].many[r];
        if (needs(j)) k.axpy(1.0, g.ptr() + r * width, grad_at(j).ptr(), width);
      }
      break;
    }
    case Op::transpose:
      if (needs(a)) {
        Tensor& ga = grad_at(a);
        const std::size_t rows = ga.rows(), cols = ga.cols();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[c * rows + r];
      }
      break;
    case Op::sum:
      if (needs(a)) {
        Tensor& ga = grad_at(a);
        for (std::size_t j = 0; j < ga.size(); ++j) ga[j] += g[0];
      }
      break;
    case Op::add_n:
      for (std::uint32_t j : nodes_[i].many)
        if (needs(j)) accumulate(grad_at(j), g);
      break;
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
  ++generation_;
}

}  // namespace gbn
