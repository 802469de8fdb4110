// SPDX-License-Identifier: Apache-2.0
#include "gbn/adadelta.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gbn/checkpoint.hpp"
#include "gbn/log.hpp"
#include "gbn/parameter.hpp"

namespace gbn {
namespace {

void update_tensor(Tensor& param, const Tensor& grad, Tensor& mean_sq_grad,
                   Tensor& mean_sq_delta, const AdadeltaOptions& opt) {
  double* x = param.ptr();
  const double* g = grad.ptr();
  double* eg = mean_sq_grad.ptr();
  double* ed = mean_sq_delta.ptr();
  for (std::size_t j = 0; j < param.size(); ++j) {
    eg[j] = opt.rho * eg[j] + (1.0 - opt.rho) * g[j] * g[j];
    const double dx = -std::sqrt(ed[j] + opt.epsilon) / std::sqrt(eg[j] + opt.epsilon) * g[j];
    ed[j] = opt.rho * ed[j] + (1.0 - opt.rho) * dx * dx;
    x[j] += dx;
  }
}

}  // namespace

AdadeltaState make_adadelta_state(std::span<const Tensor> params,
                                  AdadeltaOptions options) {
  AdadeltaState s;
  s.options = options;
  for (const Tensor& p : params) {
    s.mean_sq_grad.push_back(Tensor::zeros_like(p));
    s.mean_sq_delta.push_back(Tensor::zeros_like(p));
  }
  return s;
}

bool adadelta_step(std::span<Tensor> params, std::span<const Tensor> grads,
                   AdadeltaState& state) {
  if (params.size() != grads.size() || params.size() != state.mean_sq_grad.size() ||
      params.size() != state.mean_sq_delta.size())
    throw std::invalid_argument("adadelta_step: parameter/gradient/state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() ||
        params[i].shape() != state.mean_sq_grad[i].shape())
      throw std::invalid_argument("adadelta_step: shape mismatch at parameter " +
                                  std::to_string(i) + ": " + params[i].shape().str() +
                                  " vs " + grads[i].shape().str());
    if (!grads[i].all_finite()) return false;
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    update_tensor(params[i], grads[i], state.mean_sq_grad[i], state.mean_sq_delta[i],
                  state.options);
  return true;
}

Adadelta::Adadelta(ParamSet& params, AdadeltaOptions options) : params_(&params) {
  state_.options = options;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state_.mean_sq_grad.push_back(Tensor::zeros_like(params[i].value));
    state_.mean_sq_delta.push_back(Tensor::zeros_like(params[i].value));
  }
}

bool Adadelta::step() {
  ParamSet& ps = *params_;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].grad.all_finite()) {
      ++skipped_;
      log_warn("adadelta: non-finite gradient in " + ps[i].name + "; step skipped");
      return false;
    }
  }
  for (std::size_t i = 0; i < ps.size(); ++i)
    update_tensor(ps[i].value, ps[i].grad, state_.mean_sq_grad[i], state_.mean_sq_delta[i],
                  state_.options);
  return true;
}

void Adadelta::save(Checkpoint& ckpt, std::string_view prefix) const {
  const std::string p(prefix);
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const std::string& name = (*params_)[i].name;
    ckpt.put(p + "eg2." + name, state_.mean_sq_grad[i]);
    ckpt.put(p + "edx2." + name, state_.mean_sq_delta[i]);
  }
  Tensor skipped = Tensor::scalar(static_cast<double>(skipped_));
  ckpt.put(p + "skipped", skipped);
}

void Adadelta::load(const Checkpoint& ckpt, std::string_view prefix) {
  const std::string p(prefix);
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const std::string& name = (*params_)[i].name;
    Tensor eg = ckpt.tensor(p + "eg2." + name);
    Tensor ed = ckpt.tensor(p + "edx2." + name);
    if (eg.shape() != (*params_)[i].value.shape() || ed.shape() != eg.shape())
      throw std::runtime_error("adadelta: state shape mismatch for " + name);
    state_.mean_sq_grad[i] = std::move(eg);
    state_.mean_sq_delta[i] = std::move(ed);
  }
  skipped_ = static_cast<std::size_t>(ckpt.tensor(p + "skipped").item());
}

}  // namespace gbn
