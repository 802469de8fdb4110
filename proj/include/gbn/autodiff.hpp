// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode autodiff. A Tape records every primitive applied
// to Vars it owns; backward() walks the records in reverse creation order,
// which is a topological order because inputs always precede outputs.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gbn/tensor.hpp"

namespace gbn {

// Log-probability written for tokens excluded by a log_softmax mask. exp() of
// it is exactly 0, and it stays finite under addition of a few terms.
inline constexpr double kMaskedLogProb = -1e30;

// Inputs below this are clamped before log().
inline constexpr double kLogFloor = 1e-30;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid until the tape is
// reset or destroyed.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* t, std::uint32_t i, std::uint32_t g)
      : tape_(t), index_(i), generation_(g) {}
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  std::uint32_t generation_ = 0;
};

// Banned-token mask for log_softmax: nonzero entries are excluded.
using TokenMask = std::shared_ptr<const std::vector<std::uint8_t>>;

enum class Op : std::uint8_t {
  constant,
  param,
  matmul,
  affine,
  add,
  add_rows,
  sub,
  mul,
  scale,
  one_minus,
  sigmoid,
  tanh,
  log,
  softmax,
  log_softmax,
  embedding,
  concat,
  pick,
  slice,
  stack_rows,
  transpose,
  sum,
  add_n,
};

const char* op_name(Op op);

class Tape {
 public:
  // With record_gradients=false nothing requires grad and backward() is
  // rejected; used for sampling and search.
  explicit Tape(bool record_gradients = true)
      : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool records_gradients() const { return record_gradients_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor t);
  // Leaf bound to a parameter; backward accumulates into p.grad.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var affine(Var w, Var x, Var b);
  Var add(Var a, Var b);
  Var add_rows(Var m, Var v);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var log(Var a);
  Var softmax(Var a);
  Var log_softmax(Var a, TokenMask mask = nullptr);
  Var embedding(Var table, std::size_t index);
  Var concat(std::span<const Var> parts);
  Var pick(Var a, std::size_t index);
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var stack_rows(std::span<const Var> rows);
  Var transpose(Var m);
  Var sum(Var a);
  Var add_n(std::span<const Var> terms);

  // Seeds d(root)/d(root) = 1 and propagates to every leaf. A tape supports
  // one backward pass; reset() before recording again.
  void backward(Var root);

  // Gradient of the traced root with respect to an interior node (zeros if
  // the node did not influence the root). Parameter nodes report p.grad.
  const Tensor& grad(Var v) const;

  // Discards all nodes; Vars issued before are stale afterwards.
  void reset();

 private:
  friend class Var;

  struct Node {
    Op op = Op::constant;
    bool requires_grad = false;
    std::uint8_t n_in = 0;
    std::array<std::uint32_t, 3> in{};
    std::vector<std::uint32_t> many;
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    double factor = 0.0;
    std::size_t aux = 0;
    TokenMask mask;
  };

  std::uint32_t check(Var v, const char* op) const;
  const Tensor& value_at(std::uint32_t i) const {
    const Node& n = nodes_[i];
    return n.param ? n.param->value : n.value;
  }
  Tensor& grad_at(std::uint32_t i);
  Var push(Node&& n);
  void propagate(std::uint32_t i);

  std::vector<Node> nodes_;
  bool record_gradients_;
  bool backward_done_ = false;
  std::uint32_t generation_ = 1;
};

// Free-function spellings so model code reads as math.
inline Var matmul(Var a, Var b) { return a.tape()->matmul(a, b); }
inline Var affine(Var w, Var x, Var b) { return w.tape()->affine(w, x, b); }
inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator*(double c, Var a) { return a.tape()->scale(a, c); }
inline Var add_rows(Var m, Var v) { return m.tape()->add_rows(m, v); }
inline Var one_minus(Var a) { return a.tape()->one_minus(a); }
inline Var sigmoid(Var a) { return a.tape()->sigmoid(a); }
inline Var tanh(Var a) { return a.tape()->tanh(a); }
inline Var log(Var a) { return a.tape()->log(a); }
inline Var softmax(Var a) { return a.tape()->softmax(a); }
inline Var log_softmax(Var a, TokenMask mask = nullptr) {
  return a.tape()->log_softmax(a, std::move(mask));
}
inline Var pick(Var a, std::size_t i) { return a.tape()->pick(a, i); }
inline Var slice(Var a, std::size_t off, std::size_t len) {
  return a.tape()->slice(a, off, len);
}
inline Var transpose(Var m) { return m.tape()->transpose(m); }
inline Var sum(Var a) { return a.tape()->sum(a); }

}  // namespace gbn
