// SPDX-License-Identifier: Apache-2.0
#include "gbn/tokens.hpp"

#include <stdexcept>
#include <string>

namespace gbn {

std::span<const Token> content(std::span<const Token> seq) {
  if (!seq.empty() && seq.back() == kEos) return seq.first(seq.size() - 1);
  return seq;
}

TokenSeq with_eos(std::span<const Token> content_tokens) {
  TokenSeq out(content_tokens.begin(), content_tokens.end());
  out.push_back(kEos);
  return out;
}

StepMasks::StepMasks(std::size_t vocab_size, const DecodeConstraints& c)
    : constraints_(c) {
  if (vocab_size <= kNumSpecials)
    throw std::invalid_argument("StepMasks: vocabulary holds no content tokens");
  if (c.max_len < 1 || c.max_len < c.min_content + 1)
    throw std::invalid_argument("StepMasks: max_len " + std::to_string(c.max_len) +
                                " cannot fit min_content " + std::to_string(c.min_content));
  std::vector<std::uint8_t> regular(vocab_size, 0);
  for (Token t : c.banned) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size || t == kEos)
      throw std::invalid_argument("StepMasks: cannot ban token " + std::to_string(t));
    regular[t] = 1;
  }
  std::vector<std::uint8_t> no_eos = regular;
  no_eos[kEos] = 1;
  std::vector<std::uint8_t> only_eos(vocab_size, 1);
  only_eos[kEos] = 0;
  regular_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(regular));
  no_eos_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(no_eos));
  only_eos_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(only_eos));
}

const TokenMask& StepMasks::at(std::size_t step) const {
  if (!regular_) throw std::logic_error("StepMasks: used before construction");
  if (step + 1 >= constraints_.max_len) return only_eos_;
  if (step < constraints_.min_content) return no_eos_;
  return regular_;
}

void validate_target(std::span<const Token> target, const StepMasks& masks,
                     std::size_t vocab_size) {
  if (target.empty()) throw std::invalid_argument("target sequence is empty");
  if (target.back() != kEos) throw std::invalid_argument("target sequence must end with EOS");
  for (std::size_t t = 0; t < target.size(); ++t) {
    const Token tok = target[t];
    if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_size)
      throw std::invalid_argument("target token " + std::to_string(tok) + " out of range");
    if (tok == kEos && t + 1 != target.size())
      throw std::invalid_argument("target sequence has EOS before its end");
    if (!masks.allowed(t, tok))
      throw std::invalid_argument("target token " + std::to_string(tok) + " at step " +
                                  std::to_string(t) + " violates decode constraints");
  }
}

}  // namespace gbn
