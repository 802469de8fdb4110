// SPDX-License-Identifier: Apache-2.0
//
// Parallel plain-text corpora: one whitespace-tokenized UTF-8 sentence per
// line, source and target in separate files with matching line counts.
#pragma once

#include <cstddef>
#include <string>

#include "gbn/synth.hpp"

namespace gbn {

std::vector<Sentence> read_sentences(const std::string& path);
void write_sentences(const std::string& path, const std::vector<Sentence>& sentences);

// Drops pairs where either side is empty or longer than max_len words.
ParallelCorpus read_parallel(const std::string& src_path, const std::string& tgt_path,
                             std::size_t max_len);
void write_parallel(const std::string& src_path, const std::string& tgt_path, const ParallelCorpus& c);

}  // namespace gbn
