// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gbn/autodiff.hpp"
#include "gbn/parameter.hpp"

namespace gbn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double fd_step = 1e-5;
  double tolerance = 1e-4;
  // Elements examined per parameter, evenly strided; 0 checks all of them.
  std::size_t max_elements_per_param = 0;
};

// Builds the loss with `build` on a fresh tape, backpropagates, and compares
// every parameter gradient against central differences. Error per element is
// |g_ad - g_fd| / max(1, |g_fd|).
GradCheckReport grad_check(ParamSet& params, const std::function<Var(Tape&)>& build,
                           GradCheckOptions options = {});

}  // namespace gbn
