// SPDX-License-Identifier: Apache-2.0
#include "gbn/log.hpp"

#include <atomic>
#include <iostream>

namespace gbn {
namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::warn)};
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_warn(std::string_view message) {
  if (g_level >= static_cast<int>(LogLevel::warn))
    std::cerr << "[gbn warn] " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_level >= static_cast<int>(LogLevel::info))
    std::cerr << "[gbn] " << message << '\n';
}

}  // namespace gbn
