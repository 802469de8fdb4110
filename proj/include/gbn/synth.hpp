// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gbn/vocab.hpp"

namespace gbn {

enum class SynthKind { copy, reverse, cipher_localswap };

SynthKind parse_synth_kind(std::string_view name);  // copy | reverse | cipher+localswap
std::string synth_kind_name(SynthKind kind);

struct SynthSpec {
  SynthKind kind = SynthKind::cipher_localswap;
  std::size_t vocab = 50;
  std::size_t min_len = 6;
  std::size_t max_len = 12;
  double noise = 0.15;
  std::uint64_t seed = 1;
};

struct ParallelCorpus {
  std::vector<Sentence> src, tgt;
  std::size_t size() const { return src.size(); }
};

// Sources are drawn from a seeded first-order chain over words w0..w{V-1}
// with Zipf-shaped transitions. Targets: copy (Y = X), reverse, or a fixed
// word bijection followed by non-overlapping adjacent swaps, each with
// probability `noise`.
ParallelCorpus synth_task(const SynthSpec& spec, std::size_t n_pairs);

// Consecutive slices of one corpus.
std::vector<ParallelCorpus> split_corpus(const ParallelCorpus& c, const std::vector<std::size_t>& sizes);

}  // namespace gbn
