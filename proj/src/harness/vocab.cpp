// SPDX-License-Identifier: Apache-2.0
#include "gbn/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gbn {

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& words) {
  for (const char* w : {kPadWord, kBosWord, kEosWord, kUnkWord}) {
    index_.emplace(w, static_cast<Token>(words_.size()));
    words_.emplace_back(w);
  }
  for (const auto& w : words) {
    if (w.empty()) throw std::invalid_argument("vocab: empty word");
    if (!index_.emplace(w, static_cast<Token>(words_.size())).second)
      throw std::invalid_argument("vocab: duplicate or reserved word '" + w + "'");
    words_.push_back(w);
  }
}

Token Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(Token t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= words_.size())
    throw std::out_of_range("vocab: id " + std::to_string(t) + " out of range");
  return words_[static_cast<std::size_t>(t)];
}

TokenSeq Vocab::encode(const Sentence& s) const {
  TokenSeq out;
  out.reserve(s.size());
  for (const auto& w : s) out.push_back(id(w));
  return out;
}

Sentence Vocab::decode(std::span<const Token> t) const {
  Sentence out;
  for (Token x : t) {
    if (x == kEos) break;
    if (x == kPad || x == kBos) continue;
    out.push_back(word(x));
  }
  return out;
}

Vocab build_vocab(const std::vector<Sentence>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus)
    for (const auto& w : s) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> items;
  const Vocab specials;
  for (auto& [w, c] : counts)
    if (c >= std::max<std::size_t>(1, min_count) && !specials.contains(w)) items.emplace_back(w, c);
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(items.size());
  for (auto& [w, c] : items) words.push_back(w);
  return Vocab(words);
}

Sentence split_words(const std::string& line) {
  std::istringstream is(line);
  Sentence out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string join_words(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i];
  }
  return out;
}

}  // namespace gbn
