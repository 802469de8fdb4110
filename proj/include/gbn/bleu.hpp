// SPDX-License-Identifier: Apache-2.0
//
// Corpus-level BLEU with multi-bleu.perl semantics: clipped n-gram counts
// and lengths are pooled over the corpus, precisions for n = 1..4 are
// combined by geometric mean, and a brevity penalty applies when the
// hypotheses are shorter than the references.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace gbn {

struct BleuStats {
  std::array<std::size_t, 4> matched{};
  std::array<std::size_t, 4> total{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  double precision(std::size_t n) const {
    return total[n - 1] ? static_cast<double>(matched[n - 1]) / static_cast<double>(total[n - 1])
                        : 0.0;
  }
  double brevity_penalty() const {
    if (hyp_len == 0) return 0.0;
    return std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
  }
  // Percentage; 0 when any precision is 0.
  double bleu() const {
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      if (matched[n - 1] == 0) return 0.0;
      log_sum += std::log(precision(n));
    }
    return 100.0 * brevity_penalty() * std::exp(log_sum / 4.0);
  }
};

template <typename T>
void add_sentence(BleuStats& s, std::span<const T> hyp, std::span<const T> ref) {
  s.hyp_len += hyp.size();
  s.ref_len += ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<T>, std::size_t> ref_counts, hyp_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[std::vector<T>(ref.begin() + i, ref.begin() + i + n)];
    for (std::size_t i = 0; i + n <= hyp.size(); ++i)
      ++hyp_counts[std::vector<T>(hyp.begin() + i, hyp.begin() + i + n)];
    for (const auto& [g, c] : hyp_counts) {
      auto it = ref_counts.find(g);
      if (it != ref_counts.end()) s.matched[n - 1] += std::min(c, it->second);
      s.total[n - 1] += c;
    }
  }
}

template <typename T>
BleuStats bleu_stats(const std::vector<std::vector<T>>& hyps, const std::vector<std::vector<T>>& refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw std::invalid_argument("bleu: empty corpus");
  BleuStats s;
  for (std::size_t i = 0; i < hyps.size(); ++i)
    add_sentence<T>(s, std::span<const T>(hyps[i]), std::span<const T>(refs[i]));
  return s;
}

template <typename T>
double corpus_bleu(const std::vector<std::vector<T>>& hyps, const std::vector<std::vector<T>>& refs) {
  return bleu_stats(hyps, refs).bleu();
}

}  // namespace gbn
