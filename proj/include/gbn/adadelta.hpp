// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "gbn/tensor.hpp"

namespace gbn {

class Checkpoint;
class ParamSet;

struct AdadeltaOptions {
  double rho = 0.95;
  double epsilon = 1e-6;
};

// Running averages E[g^2] and E[dx^2], one pair per parameter tensor.
struct AdadeltaState {
  AdadeltaOptions options;
  std::vector<Tensor> mean_sq_grad;
  std::vector<Tensor> mean_sq_delta;
};

AdadeltaState make_adadelta_state(std::span<const Tensor> params,
                                  AdadeltaOptions options = {});

// One ADADELTA update in place. Returns false without touching params or
// state if any gradient is non-finite.
bool adadelta_step(std::span<Tensor> params, std::span<const Tensor> grads,
                   AdadeltaState& state);

// Optimizer bound to a ParamSet; reads each parameter's accumulated grad.
class Adadelta {
 public:
  explicit Adadelta(ParamSet& params, AdadeltaOptions options = {});

  // Returns false when the step was skipped for a non-finite gradient.
  bool step();
  std::size_t skipped_steps() const { return skipped_; }
  const AdadeltaState& state() const { return state_; }

  void save(Checkpoint& ckpt, std::string_view prefix) const;
  void load(const Checkpoint& ckpt, std::string_view prefix);

 private:
  ParamSet* params_;
  AdadeltaState state_;
  std::size_t skipped_ = 0;
};

}  // namespace gbn
