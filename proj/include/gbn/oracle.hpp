// SPDX-License-Identifier: Apache-2.0
//
// Exact computations over small, fully enumerable target spaces.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gbn/bridges.hpp"
#include "gbn/language_model.hpp"
#include "gbn/seq2seq.hpp"

namespace gbn {

inline constexpr std::size_t kEnumMaxVocab = 8;
inline constexpr std::size_t kEnumMaxLength = 4;

enum class EnumOrder { length_lex, reversed };

// Every sequence of 1..T content tokens over ids kFirstContent..kFirstContent+V-1,
// each followed by EOS. Refuses V > 8 or T > 4.
class EnumSpace {
 public:
  EnumSpace(std::size_t content_vocab, std::size_t max_length,
            EnumOrder order = EnumOrder::length_lex);

  std::size_t content_vocab() const { return content_vocab_; }
  std::size_t max_length() const { return max_length_; }
  // Full vocabulary size including specials.
  std::size_t vocab() const { return kNumSpecials + content_vocab_; }
  std::size_t size() const { return seqs_.size(); }
  const TokenSeq& operator[](std::size_t i) const { return seqs_[i]; }
  const std::vector<TokenSeq>& sequences() const { return seqs_; }
  // Index of y, or size() when absent.
  std::size_t index_of(std::span<const Token> y) const;

  // Decoder constraints under which a network's distribution is supported
  // exactly on this space.
  DecodeConstraints constraints() const;

 private:
  std::size_t content_vocab_, max_length_;
  std::vector<TokenSeq> seqs_;
};

// Probability per enumerated sequence, aligned with EnumSpace order.
struct DenseDist {
  std::vector<double> p;
};

// Sum independent of term order: terms are sorted before accumulation.
double ordered_sum(std::vector<double> terms);

double partition_Z(std::span<const Token> target, double tau, const EnumSpace& space,
                   const TokenLM* lm = nullptr);
DenseDist exact_payoff(std::span<const Token> target, double tau, const EnumSpace& space,
                       const TokenLM* lm = nullptr);
DenseDist uniform_dist(const EnumSpace& space);
DenseDist delta_dist(std::span<const Token> target, const EnumSpace& space);
// p_model(Y | source) for every Y; sums to one when the model uses
// space.constraints().
DenseDist network_dist(const Seq2Seq& model, std::span<const Token> source, const EnumSpace& space);

double total_mass(const DenseDist& d);
// Sum p log(p / q); throws when q is zero where p is positive.
double exact_kl(const DenseDist& p, const DenseDist& q);
// E_q[-S(Y, Y*) / tau] + KL(q || constraint).
double exact_bridge_loss(const DenseDist& q, std::span<const Token> target, double tau,
                         const DenseDist& constraint, const EnumSpace& space);
// E_q[-S(Y, Y*) / tau].
double exact_expected_neg_reward(const DenseDist& q, std::span<const Token> target, double tau,
                                 const EnumSpace& space);

struct CoachingGradient {
  std::vector<Tensor> reinforce;  // term (a), by parameter
  std::vector<Tensor> kl;         // term (b)
  std::vector<Tensor> total;
};

// Both expectations of the coaching update by enumeration: term (a) under the
// bridge's own distribution with the configured reward mode, term (b) under
// gen_dist.
CoachingGradient exact_coaching_gradient(Seq2Seq& bridge, std::span<const Token> target,
                                         const DenseDist& gen_dist, double tau,
                                         const EnumSpace& space, RewardMode mode,
                                         double constant_reward = 1.0);

struct SuiteCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Small end-to-end equivalence checks between the closed forms, samplers and
// networks and their enumerated values.
std::vector<SuiteCheck> run_equivalence_suite(std::uint64_t seed = 1);

}  // namespace gbn
