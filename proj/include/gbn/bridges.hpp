// SPDX-License-Identifier: Apache-2.0
//
// Bridge distributions p(Y | Y*) over target sequences. Every sequence
// argument and result ends with EOS; edits and similarity scores apply to the
// content tokens in front of it.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbn/adadelta.hpp"
#include "gbn/language_model.hpp"
#include "gbn/rng.hpp"
#include "gbn/seq2seq.hpp"
#include "gbn/tokens.hpp"

namespace gbn {

enum class BridgeKind { delta, uniform, lm, coaching };

BridgeKind parse_bridge_kind(std::string_view name);
std::string bridge_kind_name(BridgeKind kind);

struct BridgeConfig {
  BridgeKind kind = BridgeKind::uniform;
  double tau = 0.8;
  int m_max = -1;  // negative: ceil(0.25 * len(Y*))
  std::size_t K = 5;
};

void validate(const BridgeConfig& cfg);

// m_max for a reference of `len` content tokens. Throws std::invalid_argument
// when an explicit m_max exceeds len.
std::size_t resolve_m_max(const BridgeConfig& cfg, std::size_t len);

// q(m) proportional to C(len, m) exp(-m / (tau len)) for m = 0..m_max,
// normalized.
std::vector<double> edit_distance_law(std::size_t len, double tau, std::size_t m_max);

struct StratifiedSample {
  TokenSeq tokens;
  std::size_t m = 0;
  std::vector<std::size_t> positions;  // edited content positions, ascending
};

// Delta bridge.
TokenSeq delta_sample(std::span<const Token> target);

// Draws m from edit_distance_law, m distinct positions uniformly, then
// replaces each position with a content token (ids kFirstContent..vocab-1)
// other than the original, uniformly.
StratifiedSample stratified_sample_uniform(std::span<const Token> target, const BridgeConfig& cfg,
                                           std::size_t vocab, Rng& rng);

// Probability of `y` under stratified_sample_uniform.
double stratified_uniform_prob(std::span<const Token> y, std::span<const Token> target,
                               const BridgeConfig& cfg, std::size_t vocab);

// Same edit-distance and position stages; chosen positions are filled left to
// right from the LM's next-token distribution given the edited prefix,
// restricted to content tokens other than the original and renormalized.
StratifiedSample stratified_sample_lm(std::span<const Token> target, const BridgeConfig& cfg,
                                      const TokenLM& lm, Rng& rng);

// exp(S(Y, Y*) / tau).
double uniform_payoff_unnorm(std::span<const Token> y, std::span<const Token> target, double tau);
// p_LM(Y) exp(S(Y, Y*) / tau).
double lm_payoff_unnorm(std::span<const Token> y, std::span<const Token> target, double tau,
                        const TokenLM& lm);

struct BridgeNets {
  const TokenLM* lm = nullptr;
  const Seq2Seq* coaching = nullptr;
};

// Unnormalized kernel (delta, uniform, lm) or exact network probability
// (coaching).
double bridge_density(BridgeKind kind, std::span<const Token> y, std::span<const Token> target,
                      const BridgeConfig& cfg, const BridgeNets& nets);

// Ancestral sample from the coaching network with content(Y*) as source.
Sample coaching_sample(std::span<const Token> target, const Seq2Seq& bridge, Rng& rng);

// K samples from the configured bridge.
std::vector<TokenSeq> draw_bridge_samples(std::span<const Token> target, const BridgeConfig& cfg,
                                          const BridgeNets& nets, std::size_t vocab, Rng& rng);

enum class RewardMode {
  step,      // per-token coefficients -s_t / tau
  sequence,  // every token weighted by -S(Y, Y*) / tau
  constant,  // every token weighted by -constant_reward / tau
};

struct CoachingOptions {
  double tau = 0.8;
  RewardMode reward = RewardMode::step;
  double constant_reward = 1.0;
  std::size_t reinforce_samples = 1;
  std::size_t kl_samples = 1;
  bool use_reinforce = true;
  bool use_kl = true;
  bool baseline = false;
  double baseline_decay = 0.9;
};

// Moving-average baseline state, one entry per target position.
struct CoachingState {
  std::vector<double> baseline;
  std::vector<bool> seen;
};

struct CoachingItem {
  TokenSeq source;  // X
  TokenSeq target;  // Y*, ends with EOS
};

struct CoachingLosses {
  double reinforce = 0.0;    // surrogate sum_t c_t log p(y_t | ...), averaged
  double kl = 0.0;           // mean -log p_bridge(Y_gen | Y*)
  double mean_reward = 0.0;  // mean S(Y, Y*) of bridge samples
  bool applied = false;
};

// Zeroes and fills bridge.params() gradients with
//   (1/B) sum_b [ (1/Ka) sum_a sum_t c_t grad log p_bridge(y_t | ...)
//               + (1/Kb) sum_k grad -log p_bridge(Y_gen^k | Y*_b) ]
// where Y ~ bridge(. | Y*) and Y_gen ~ generator(. | X).
CoachingLosses coaching_gradients(std::span<const CoachingItem> batch, Seq2Seq& bridge,
                                  const Seq2Seq& generator, const CoachingOptions& options,
                                  Rng& rng, CoachingState* state = nullptr);

// coaching_gradients followed by one optimizer step on the bridge. A
// non-finite gradient skips the step and logs a warning.
CoachingLosses coaching_update(std::span<const CoachingItem> batch, Seq2Seq& bridge,
                               const Seq2Seq& generator, const CoachingOptions& options,
                               Adadelta& bridge_opt, Rng& rng, CoachingState* state = nullptr);

}  // namespace gbn
