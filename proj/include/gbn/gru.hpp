// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include "gbn/autodiff.hpp"
#include "gbn/parameter.hpp"

namespace gbn {

// Gated recurrent unit with stacked gate weights (reset, update, candidate):
//   r = sigmoid(W_r x + b_r + U_r h + c_r)
//   z = sigmoid(W_z x + b_z + U_z h + c_z)
//   n = tanh(W_n x + b_n + r * (U_n h + c_n))
//   h' = (1 - z) * n + z * h
class GruLayer {
 public:
  GruLayer() = default;
  GruLayer(ParamSet& params, const std::string& prefix, std::size_t input_dim,
           std::size_t hidden_dim);

  struct Bound {
    Var w_input, w_hidden, b_input, b_hidden;
  };

  Bound bind(Tape& tape) const;
  Var step(const Bound& b, Var x, Var h) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

 private:
  Parameter* w_input_ = nullptr;   // 3H x I
  Parameter* w_hidden_ = nullptr;  // 3H x H
  Parameter* b_input_ = nullptr;   // 3H
  Parameter* b_hidden_ = nullptr;  // 3H
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

}  // namespace gbn
