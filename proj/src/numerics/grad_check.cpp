// SPDX-License-Identifier: Apache-2.0
#include "gbn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gbn {
namespace {

double eval_loss(const std::function<Var(Tape&)>& build) {
  Tape tape(false);
  const double v = build(tape).value().item();
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport grad_check(ParamSet& params, const std::function<Var(Tape&)>& build,
                           GradCheckOptions options) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    if (!std::isfinite(loss.value().item()))
      throw std::runtime_error("grad_check: non-finite loss");
    tape.backward(loss);
  }
  const std::vector<Tensor> analytic = params.snapshot_grads();

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    GradCheckEntry entry;
    entry.name = p.name;
    const std::size_t n = p.value.size();
    const std::size_t stride =
        options.max_elements_per_param == 0 || n <= options.max_elements_per_param
            ? 1
            : n / options.max_elements_per_param;
    for (std::size_t j = 0; j < n; j += stride) {
      const double saved = p.value[j];
      p.value[j] = saved + options.fd_step;
      const double up = eval_loss(build);
      p.value[j] = saved - options.fd_step;
      const double down = eval_loss(build);
      p.value[j] = saved;
      const double fd = (up - down) / (2.0 * options.fd_step);
      const double err = std::abs(analytic[pi][j] - fd) / std::max(1.0, std::abs(fd));
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = j;
      }
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(entry);
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace gbn
