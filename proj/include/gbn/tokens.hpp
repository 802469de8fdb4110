// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gbn/autodiff.hpp"

namespace gbn {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

inline constexpr Token kPad = 0;
inline constexpr Token kBos = 1;
inline constexpr Token kEos = 2;
inline constexpr Token kUnk = 3;
inline constexpr Token kFirstContent = 4;
inline constexpr std::size_t kNumSpecials = 4;

// Drops one trailing EOS if present.
std::span<const Token> content(std::span<const Token> seq);
TokenSeq with_eos(std::span<const Token> content_tokens);

// Which tokens a decoder may emit at each step. max_len counts every token
// including the final EOS; a sequence reaching max_len - 1 content tokens is
// forced to end. Steps before min_content tokens have been emitted cannot
// produce EOS.
struct DecodeConstraints {
  std::size_t max_len = 50;
  std::size_t min_content = 1;
  std::vector<Token> banned{kPad, kBos};
};

// Precomputed log_softmax masks for one vocabulary and constraint set.
class StepMasks {
 public:
  StepMasks() = default;
  StepMasks(std::size_t vocab_size, const DecodeConstraints& c);

  // Mask for the step that emits token number `step` (0-based).
  const TokenMask& at(std::size_t step) const;
  bool allowed(std::size_t step, Token t) const { return (*at(step))[t] == 0; }
  const DecodeConstraints& constraints() const { return constraints_; }

 private:
  DecodeConstraints constraints_;
  TokenMask regular_, no_eos_, only_eos_;
};

// Throws std::invalid_argument unless `target` ends with exactly one EOS and
// every step is allowed by `masks`.
void validate_target(std::span<const Token> target, const StepMasks& masks,
                     std::size_t vocab_size);

}  // namespace gbn
