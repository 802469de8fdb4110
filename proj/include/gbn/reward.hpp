// SPDX-License-Identifier: Apache-2.0
//
// Surrogate n-gram similarity between a sequence and its reference, and its
// per-token decomposition. Functions score the token sequences exactly as
// given; callers decide whether a trailing EOS takes part.
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "gbn/tokens.hpp"

namespace gbn {

inline constexpr std::size_t kMaxOrder = 4;

// Occurrence counts of every 1- to 4-gram of one sequence.
class NGramTable {
 public:
  explicit NGramTable(std::span<const Token> seq);

  std::size_t count(std::span<const Token> gram) const;
  // Number of n-grams of order n, i.e. max(0, len - n + 1).
  std::size_t total(std::size_t n) const;
  const std::map<std::vector<Token>, std::size_t>& order(std::size_t n) const;

 private:
  std::array<std::map<std::vector<Token>, std::size_t>, kMaxOrder> counts_;
  std::size_t length_;
};

// Clipped n-gram precision of y against ref, 0 when y has no n-grams.
double ngram_precision(std::span<const Token> y, std::span<const Token> ref, std::size_t n);

// 0.4 N4 + 0.3 N3 + 0.2 N2 + 0.1 N1.
double similarity_score(std::span<const Token> y, std::span<const Token> ref);

inline constexpr std::array<double, 5> kStepTiers{1.0, 0.6, 0.3, 0.1, 0.0};

// Reward of the last token of `prefix`: 1.0 / 0.6 / 0.3 / 0.1 when the 4-, 3-,
// 2- or 1-gram ending there occurs in the prefix no more often than in ref,
// checked from the longest order down; 0.0 otherwise. Orders longer than the
// prefix are skipped.
double stepwise_reward(std::span<const Token> prefix, std::span<const Token> ref);

// stepwise_reward for every prefix of y, in one pass.
std::vector<double> stepwise_rewards(std::span<const Token> y, std::span<const Token> ref);

// -stepwise_rewards(y, ref) / tau. Throws std::invalid_argument for tau <= 0.
std::vector<double> step_gradient_coeffs(std::span<const Token> y, std::span<const Token> ref,
                                         double tau);

}  // namespace gbn
