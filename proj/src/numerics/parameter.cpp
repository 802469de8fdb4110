// SPDX-License-Identifier: Apache-2.0
#include "gbn/parameter.hpp"

#include <stdexcept>

namespace gbn {

Parameter& ParamSet::add(std::string name, Shape shape) {
  if (find(name)) throw std::invalid_argument("ParamSet: duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Tensor(shape);
  p->grad = Tensor(shape);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParamSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParamSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParamSet::at(std::string_view name) {
  Parameter* p = find(name);
  if (!p) throw std::out_of_range("ParamSet: no parameter named " + std::string(name));
  return *p;
}

std::size_t ParamSet::num_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamSet::init_uniform(Rng& rng, double lo, double hi) {
  for (auto& p : params_)
    for (double& x : p->value.data()) x = uniform(rng, lo, hi);
}

void ParamSet::zero_grad() {
  for (auto& p : params_) {
    if (p->grad.shape() != p->value.shape())
      p->grad = Tensor::zeros_like(p->value);
    else
      p->grad.fill(0.0);
  }
}

bool ParamSet::grads_finite() const {
  for (const auto& p : params_)
    if (!p->grad.all_finite()) return false;
  return true;
}

std::vector<Tensor> ParamSet::snapshot_values() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

std::vector<Tensor> ParamSet::snapshot_grads() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->grad);
  return out;
}

void ParamSet::restore_values(const std::vector<Tensor>& values) {
  if (values.size() != params_.size())
    throw std::invalid_argument("ParamSet::restore_values: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i]->value.shape())
      throw std::invalid_argument("ParamSet::restore_values: shape mismatch for " +
                                  params_[i]->name);
    params_[i]->value = values[i];
  }
}

}  // namespace gbn
