// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gbn/adadelta.hpp"
#include "gbn/autodiff.hpp"
#include "gbn/gru.hpp"
#include "gbn/parameter.hpp"
#include "gbn/rng.hpp"
#include "gbn/tokens.hpp"

namespace gbn {

// Left-to-right token model. A state summarizes BOS plus every token fed so
// far; log_probs(state) is the next-token distribution over the full
// vocabulary.
class TokenLM {
 public:
  virtual ~TokenLM() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual Tensor start() const = 0;
  virtual Tensor advance(const Tensor& state, Token t) const = 0;
  virtual std::vector<double> log_probs(const Tensor& state) const = 0;

  // Next-token probabilities after `prefix`, which must begin with BOS.
  std::vector<double> step_dist(std::span<const Token> prefix) const;
  // Sum of step log-probs of y (which ends with EOS), BOS implicit.
  virtual double seq_logprob(std::span<const Token> y) const;
};

// Uniform over every sequence of 1..max_content content tokens followed by
// EOS, so p_LM(Y) is the same constant for all of them. Step distributions
// weight each continuation by its number of completions.
class UniformLM final : public TokenLM {
 public:
  UniformLM(std::size_t content_vocab, std::size_t max_content);
  std::size_t vocab_size() const override { return kNumSpecials + content_vocab_; }
  Tensor start() const override { return Tensor::vector({0.0}); }
  Tensor advance(const Tensor& s, Token t) const override;
  std::vector<double> log_probs(const Tensor& s) const override;

 private:
  std::size_t content_vocab_, max_content_;
  std::vector<double> completions_;  // by number of content tokens so far
};

struct LmConfig {
  std::size_t vocab = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
};

class GruLM final : public TokenLM {
 public:
  GruLM(const LmConfig& config, Rng& init_rng);
  GruLM(GruLM&&) = default;

  const LmConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  std::size_t vocab_size() const override { return config_.vocab; }
  Tensor start() const override;
  Tensor advance(const Tensor& state, Token t) const override;
  std::vector<double> log_probs(const Tensor& state) const override;
  double seq_logprob(std::span<const Token> y) const override;

  // Teacher-forced log p(y) recorded on `tape`.
  Var seq_logprob(Tape& tape, std::span<const Token> y);

 private:
  void check_token(Token t) const;

  LmConfig config_;
  ParamSet params_;
  Parameter* embed_;
  GruLayer gru_;
  Parameter* out_w_;
  Parameter* out_b_;
};

struct LmTrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  std::uint64_t shuffle_seed = 1;
};

struct LmEpochLog {
  std::size_t epoch = 0;
  double train_perplexity = 0.0;
  double heldout_perplexity = 0.0;  // 0 when no held-out set was given
};

// exp(total NLL / total tokens), EOS counted as a token.
double perplexity(const TokenLM& lm, std::span<const TokenSeq> corpus);

// Minimizes per-token cross-entropy with ADADELTA. Sequences end with EOS.
std::vector<LmEpochLog> lm_train(GruLM& lm, Adadelta& opt, std::span<const TokenSeq> corpus,
                                 std::span<const TokenSeq> heldout, const LmTrainOptions& options);

}  // namespace gbn
