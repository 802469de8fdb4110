// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace gbn {

// All randomness flows through explicitly seeded engines. The mapping from
// engine output to doubles is fixed here rather than left to the
// implementation-defined std distributions, so runs replay exactly.
using Rng = std::mt19937_64;

// Uniform on [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform on {0, ..., n-1}; n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

// Draws an index with probability proportional to weights[i] (nonnegative,
// not all zero).
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace gbn
