// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gbn/autodiff.hpp"
#include "gbn/rng.hpp"

namespace gbn {

// Owns a network's parameters. Addresses are stable for the lifetime of the
// set, so models keep raw Parameter pointers into it.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& add(std::string name, Shape shape);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::size_t size() const { return params_.size(); }
  std::size_t num_elements() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void init_uniform(Rng& rng, double lo = -0.08, double hi = 0.08);
  void zero_grad();
  bool grads_finite() const;

  std::vector<Tensor> snapshot_values() const;
  std::vector<Tensor> snapshot_grads() const;
  void restore_values(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace gbn
