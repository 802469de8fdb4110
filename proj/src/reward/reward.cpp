// SPDX-License-Identifier: Apache-2.0
#include "gbn/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gbn {

NGramTable::NGramTable(std::span<const Token> seq) : length_(seq.size()) {
  for (std::size_t n = 1; n <= kMaxOrder; ++n)
    for (std::size_t i = 0; i + n <= seq.size(); ++i)
      ++counts_[n - 1][std::vector<Token>(seq.begin() + i, seq.begin() + i + n)];
}

std::size_t NGramTable::count(std::span<const Token> gram) const {
  if (gram.empty() || gram.size() > kMaxOrder) return 0;
  const auto& m = counts_[gram.size() - 1];
  auto it = m.find(std::vector<Token>(gram.begin(), gram.end()));
  return it == m.end() ? 0 : it->second;
}

std::size_t NGramTable::total(std::size_t n) const {
  return length_ >= n ? length_ - n + 1 : 0;
}

const std::map<std::vector<Token>, std::size_t>& NGramTable::order(std::size_t n) const {
  if (n == 0 || n > kMaxOrder) throw std::out_of_range("NGramTable: order must be in 1..4");
  return counts_[n - 1];
}

namespace {

double clipped_precision(const NGramTable& y, const NGramTable& ref, std::size_t n) {
  const std::size_t total = y.total(n);
  if (total == 0) return 0.0;
  std::size_t matched = 0;
  for (const auto& [gram, c] : y.order(n)) matched += std::min(c, ref.count(gram));
  return static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace

double ngram_precision(std::span<const Token> y, std::span<const Token> ref, std::size_t n) {
  if (n == 0 || n > kMaxOrder) throw std::out_of_range("ngram_precision: n must be in 1..4");
  return clipped_precision(NGramTable(y), NGramTable(ref), n);
}

double similarity_score(std::span<const Token> y, std::span<const Token> ref) {
  const NGramTable ty(y), tr(ref);
  // Summed from the lowest order up so that four perfect precisions give
  // exactly 1.0.
  return 0.1 * clipped_precision(ty, tr, 1) + 0.2 * clipped_precision(ty, tr, 2) +
         0.3 * clipped_precision(ty, tr, 3) + 0.4 * clipped_precision(ty, tr, 4);
}

std::vector<double> stepwise_rewards(std::span<const Token> y, std::span<const Token> ref) {
  const NGramTable tr(ref);
  std::array<std::map<std::vector<Token>, std::size_t>, kMaxOrder> seen;
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t t = 1; t <= y.size(); ++t) {
    // Update prefix counts with the grams ending at t before testing them.
    for (std::size_t n = 1; n <= std::min(t, kMaxOrder); ++n)
      ++seen[n - 1][std::vector<Token>(y.begin() + (t - n), y.begin() + t)];
    double r = 0.0;
    for (std::size_t n = kMaxOrder; n >= 1; --n) {
      if (t < n) continue;
      std::vector<Token> gram(y.begin() + (t - n), y.begin() + t);
      if (seen[n - 1][gram] <= tr.count(gram)) {
        r = kStepTiers[kMaxOrder - n];
        break;
      }
    }
    out.push_back(r);
  }
  return out;
}

double stepwise_reward(std::span<const Token> prefix, std::span<const Token> ref) {
  if (prefix.empty()) throw std::invalid_argument("stepwise_reward: empty prefix");
  return stepwise_rewards(prefix, ref).back();
}

std::vector<double> step_gradient_coeffs(std::span<const Token> y, std::span<const Token> ref,
                                         double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("step_gradient_coeffs: tau must be positive");
  auto r = stepwise_rewards(y, ref);
  for (double& v : r) v = -v / tau;
  return r;
}

}  // namespace gbn
