// SPDX-License-Identifier: Apache-2.0
//
// Attentive GRU encoder-decoder p(Y|X). The encoder is a forward GRU (or a
// forward/backward pair when bidirectional); the decoder attends over the
// encoder states with additive scores v . tanh(W_enc h_i + W_dec s), feeds
// [embedding(prev); context] to its GRU and projects the new state to
// log-probabilities over the target vocabulary.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gbn/autodiff.hpp"
#include "gbn/gru.hpp"
#include "gbn/parameter.hpp"
#include "gbn/rng.hpp"
#include "gbn/tokens.hpp"

namespace gbn {

struct Seq2SeqConfig {
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  bool bidirectional = false;
  DecodeConstraints constraints;
};

struct Sample {
  TokenSeq tokens;  // ends with EOS
  double logprob = 0.0;
  bool truncated = false;  // EOS was forced by max_len
};

struct BeamResult {
  TokenSeq tokens;
  double logprob = 0.0;
};

class Seq2Seq;

// Binds a model's parameters to one tape and records encoder/decoder
// computations on it.
class Seq2SeqGraph {
 public:
  Seq2SeqGraph(Seq2Seq& model, Tape& tape);

  struct Encoded {
    std::vector<Var> states;  // one per source token, width context_dim
    Var memory_t;             // context_dim x S
    Var keys;                 // S x H, W_enc applied to every state
    Var initial_state;        // decoder s_0
  };

  struct Step {
    Var log_probs;  // target_vocab, masked entries = kMaskedLogProb
    Var state;
    Var attention;  // S
  };

  struct TapeSample {
    TokenSeq tokens;
    std::vector<Var> step_logprobs;
    bool truncated = false;
  };

  Encoded encode(std::span<const Token> source);
  Step decode_step(const Encoded& enc, Token prev, Var state, std::size_t step);
  // Teacher-forced sum of log p(y_t | y_<t, X) including the EOS step.
  // Optionally returns the per-step terms.
  Var sequence_logprob(const Encoded& enc, std::span<const Token> target,
                       std::vector<Var>* step_terms = nullptr);
  // Ancestral sample recorded on the tape, so its log-probability terms can
  // be differentiated directly.
  TapeSample sample(const Encoded& enc, Rng& rng);

  Tape& tape() { return *tape_; }

 private:
  Seq2Seq* model_;
  Tape* tape_;
  Var src_embed_, tgt_embed_;
  GruLayer::Bound enc_fwd_, enc_bwd_, dec_;
  Var att_enc_, att_dec_, att_v_, init_w_, init_b_, out_w_, out_b_;
};

class Seq2Seq {
 public:
  // Parameters are drawn uniform(-0.08, 0.08) from init_rng.
  Seq2Seq(const Seq2SeqConfig& config, Rng& init_rng);
  Seq2Seq(const Seq2Seq&) = delete;
  Seq2Seq& operator=(const Seq2Seq&) = delete;
  Seq2Seq(Seq2Seq&&) = default;

  const Seq2SeqConfig& config() const { return config_; }
  const StepMasks& masks() const { return masks_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::size_t context_dim() const;

  // Inference helpers on private no-gradient tapes.
  std::vector<Tensor> encode_states(std::span<const Token> source) const;
  double sequence_logprob(std::span<const Token> source, std::span<const Token> target) const;
  Sample sample(std::span<const Token> source, Rng& rng) const;
  BeamResult beam_search(std::span<const Token> source, std::size_t beam) const;

  void validate_source(std::span<const Token> source) const;

 private:
  friend class Seq2SeqGraph;

  Seq2SeqConfig config_;
  StepMasks masks_;
  ParamSet params_;
  Parameter* src_embed_;
  Parameter* tgt_embed_;
  GruLayer enc_fwd_, enc_bwd_, dec_;
  Parameter* att_enc_;  // H x C
  Parameter* att_dec_;  // H x H
  Parameter* att_v_;    // H
  Parameter* init_w_;   // H x C
  Parameter* init_b_;   // H
  Parameter* out_w_;    // V x H
  Parameter* out_b_;    // V
};

}  // namespace gbn
