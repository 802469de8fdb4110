// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbn/tokens.hpp"

namespace gbn {

using Sentence = std::vector<std::string>;

class Vocab {
 public:
  static constexpr const char* kPadWord = "<pad>";
  static constexpr const char* kBosWord = "<s>";
  static constexpr const char* kEosWord = "</s>";
  static constexpr const char* kUnkWord = "<unk>";

  Vocab();
  // Specials first, then `words` in the given order. Duplicates and special
  // spellings are rejected.
  explicit Vocab(const std::vector<std::string>& words);

  std::size_t size() const { return words_.size(); }
  Token id(const std::string& word) const;  // kUnk when absent
  bool contains(const std::string& word) const { return index_.count(word) > 0; }
  const std::string& word(Token t) const;
  const std::vector<std::string>& words() const { return words_; }

  TokenSeq encode(const Sentence& s) const;        // no EOS
  Sentence decode(std::span<const Token> t) const;  // stops at EOS, skips PAD/BOS

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Token> index_;
};

// Words sorted by descending frequency, ties lexicographic; words seen fewer
// than min_count times map to UNK.
Vocab build_vocab(const std::vector<Sentence>& corpus, std::size_t min_count = 1);

Sentence split_words(const std::string& line);
std::string join_words(const Sentence& s);

}  // namespace gbn
