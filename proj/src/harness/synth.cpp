// SPDX-License-Identifier: Apache-2.0
#include "gbn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gbn/rng.hpp"

namespace gbn {

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "copy") return SynthKind::copy;
  if (name == "reverse") return SynthKind::reverse;
  if (name == "cipher+localswap" || name == "cipher") return SynthKind::cipher_localswap;
  throw std::invalid_argument("unknown synthetic task '" + std::string(name) + "'");
}

std::string synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::copy: return "copy";
    case SynthKind::reverse: return "reverse";
    case SynthKind::cipher_localswap: return "cipher+localswap";
  }
  return "?";
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

// Zipf weights over a random ranking of n outcomes.
std::vector<double> zipf_row(std::size_t n, Rng& rng) {
  const auto rank = permutation(n, rng);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[rank[i]] = 1.0 / static_cast<double>(i + 1);
  return w;
}

}  // namespace

ParallelCorpus synth_task(const SynthSpec& spec, std::size_t n_pairs) {
  if (spec.vocab < 2) throw std::invalid_argument("synth_task: vocab must be at least 2");
  if (spec.min_len == 0 || spec.min_len > spec.max_len)
    throw std::invalid_argument("synth_task: invalid length range");
  if (spec.noise < 0.0 || spec.noise > 1.0)
    throw std::invalid_argument("synth_task: noise must be in [0, 1]");
  Rng rng(spec.seed);
  const std::size_t V = spec.vocab;
  std::vector<std::string> words(V);
  for (std::size_t i = 0; i < V; ++i) words[i] = "w" + std::to_string(i);
  const auto cipher = permutation(V, rng);
  const auto start = zipf_row(V, rng);
  std::vector<std::vector<double>> trans;
  for (std::size_t i = 0; i < V; ++i) trans.push_back(zipf_row(V, rng));

  ParallelCorpus out;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const std::size_t len = spec.min_len + uniform_index(rng, spec.max_len - spec.min_len + 1);
    std::vector<std::size_t> x(len);
    x[0] = sample_categorical(rng, start);
    for (std::size_t i = 1; i < len; ++i) x[i] = sample_categorical(rng, trans[x[i - 1]]);
    std::vector<std::size_t> y = x;
    switch (spec.kind) {
      case SynthKind::copy:
        break;
      case SynthKind::reverse:
        std::reverse(y.begin(), y.end());
        break;
      case SynthKind::cipher_localswap:
        for (auto& t : y) t = cipher[t];
        for (std::size_t i = 0; i + 1 < len; ++i)
          if (uniform01(rng) < spec.noise) {
            std::swap(y[i], y[i + 1]);
            ++i;
          }
        break;
    }
    Sentence xs, ys;
    for (auto t : x) xs.push_back(words[t]);
    for (auto t : y) ys.push_back(words[t]);
    out.src.push_back(std::move(xs));
    out.tgt.push_back(std::move(ys));
  }
  return out;
}

std::vector<ParallelCorpus> split_corpus(const ParallelCorpus& c, const std::vector<std::size_t>& sizes) {
  const std::size_t need = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (need > c.size()) throw std::invalid_argument("split_corpus: not enough pairs");
  std::vector<ParallelCorpus> out;
  std::size_t at = 0;
  for (std::size_t n : sizes) {
    ParallelCorpus p;
    p.src.assign(c.src.begin() + at, c.src.begin() + at + n);
    p.tgt.assign(c.tgt.begin() + at, c.tgt.begin() + at + n);
    out.push_back(std::move(p));
    at += n;
  }
  return out;
}

}  // namespace gbn
