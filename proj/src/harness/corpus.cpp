// SPDX-License-Identifier: Apache-2.0
#include "gbn/corpus.hpp"

#include <fstream>
#include <stdexcept>

namespace gbn {

std::vector<Sentence> read_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Sentence> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(split_words(line));
  }
  return out;
}

void write_sentences(const std::string& path, const std::vector<Sentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& s : sentences) out << join_words(s) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

ParallelCorpus read_parallel(const std::string& src_path, const std::string& tgt_path,
                             std::size_t max_len) {
  auto src = read_sentences(src_path);
  auto tgt = read_sentences(tgt_path);
  if (src.size() != tgt.size())
    throw std::runtime_error("parallel corpus: " + src_path + " has " + std::to_string(src.size()) +
                             " lines but " + tgt_path + " has " + std::to_string(tgt.size()));
  ParallelCorpus out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].empty() || tgt[i].empty() || src[i].size() > max_len || tgt[i].size() > max_len)
      continue;
    out.src.push_back(std::move(src[i]));
    out.tgt.push_back(std::move(tgt[i]));
  }
  return out;
}

void write_parallel(const std::string& src_path, const std::string& tgt_path, const ParallelCorpus& c) {
  write_sentences(src_path, c.src);
  write_sentences(tgt_path, c.tgt);
}

}  // namespace gbn
