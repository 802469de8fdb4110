// SPDX-License-Identifier: Apache-2.0
#include "gbn/gru.hpp"

namespace gbn {

GruLayer::GruLayer(ParamSet& params, const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  w_input_ = &params.add(prefix + ".w_input", Shape{3 * hidden_dim, input_dim});
  w_hidden_ = &params.add(prefix + ".w_hidden", Shape{3 * hidden_dim, hidden_dim});
  b_input_ = &params.add(prefix + ".b_input", Shape{3 * hidden_dim});
  b_hidden_ = &params.add(prefix + ".b_hidden", Shape{3 * hidden_dim});
}

GruLayer::Bound GruLayer::bind(Tape& tape) const {
  return {tape.param(*w_input_), tape.param(*w_hidden_), tape.param(*b_input_),
          tape.param(*b_hidden_)};
}

Var GruLayer::step(const Bound& b, Var x, Var h) const {
  const std::size_t H = hidden_dim_;
  Var gi = affine(b.w_input, x, b.b_input);
  Var gh = affine(b.w_hidden, h, b.b_hidden);
  Var r = sigmoid(slice(gi, 0, H) + slice(gh, 0, H));
  Var z = sigmoid(slice(gi, H, H) + slice(gh, H, H));
  Var n = tanh(slice(gi, 2 * H, H) + r * slice(gh, 2 * H, H));
  return one_minus(z) * n + z * h;
}

}  // namespace gbn
