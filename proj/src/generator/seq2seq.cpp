// SPDX-License-Identifier: Apache-2.0
#include "gbn/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gbn {

Seq2Seq::Seq2Seq(const Seq2SeqConfig& config, Rng& init_rng)
    : config_(config), masks_(config.target_vocab, config.constraints) {
  if (config.source_vocab <= kNumSpecials || config.target_vocab <= kNumSpecials)
    throw std::invalid_argument("seq2seq: vocabularies must contain content tokens");
  if (config.embed_dim == 0 || config.hidden_dim == 0)
    throw std::invalid_argument("seq2seq: embed_dim and hidden_dim must be positive");
  const std::size_t E = config.embed_dim, H = config.hidden_dim, C = context_dim();
  const std::size_t V = config.target_vocab;
  src_embed_ = &params_.add("src_embed", Shape{config.source_vocab, E});
  tgt_embed_ = &params_.add("tgt_embed", Shape{V, E});
  enc_fwd_ = GruLayer(params_, "enc_fwd", E, H);
  if (config.bidirectional) enc_bwd_ = GruLayer(params_, "enc_bwd", E, H);
  dec_ = GruLayer(params_, "dec", E + C, H);
  att_enc_ = &params_.add("att_enc", Shape{H, C});
  att_dec_ = &params_.add("att_dec", Shape{H, H});
  att_v_ = &params_.add("att_v", Shape{H});
  init_w_ = &params_.add("init_w", Shape{H, C});
  init_b_ = &params_.add("init_b", Shape{H});
  out_w_ = &params_.add("out_w", Shape{V, H});
  out_b_ = &params_.add("out_b", Shape{V});
  params_.init_uniform(init_rng);
}

std::size_t Seq2Seq::context_dim() const {
  return config_.bidirectional ? 2 * config_.hidden_dim : config_.hidden_dim;
}

void Seq2Seq::validate_source(std::span<const Token> source) const {
  if (source.empty()) throw std::invalid_argument("seq2seq: empty source");
  for (Token t : source)
    if (t < 0 || static_cast<std::size_t>(t) >= config_.source_vocab)
      throw std::out_of_range("seq2seq: source token " + std::to_string(t) +
                              " outside vocabulary");
}

Seq2SeqGraph::Seq2SeqGraph(Seq2Seq& m, Tape& tape) : model_(&m), tape_(&tape) {
  src_embed_ = tape.param(*m.src_embed_);
  tgt_embed_ = tape.param(*m.tgt_embed_);
  enc_fwd_ = m.enc_fwd_.bind(tape);
  if (m.config_.bidirectional) enc_bwd_ = m.enc_bwd_.bind(tape);
  dec_ = m.dec_.bind(tape);
  att_enc_ = tape.param(*m.att_enc_);
  att_dec_ = tape.param(*m.att_dec_);
  att_v_ = tape.param(*m.att_v_);
  init_w_ = tape.param(*m.init_w_);
  init_b_ = tape.param(*m.init_b_);
  out_w_ = tape.param(*m.out_w_);
  out_b_ = tape.param(*m.out_b_);
}

Seq2SeqGraph::Encoded Seq2SeqGraph::encode(std::span<const Token> source) {
  model_->validate_source(source);
  Tape& t = *tape_;
  const std::size_t S = source.size(), H = model_->config_.hidden_dim;
  std::vector<Var> emb;
  emb.reserve(S);
  for (Token tok : source) emb.push_back(t.embedding(src_embed_, static_cast<std::size_t>(tok)));

  std::vector<Var> fwd;
  fwd.reserve(S);
  Var h = t.constant(Tensor::vector(std::vector<double>(H, 0.0)));
  for (std::size_t i = 0; i < S; ++i) {
    h = model_->enc_fwd_.step(enc_fwd_, emb[i], h);
    fwd.push_back(h);
  }

  Encoded enc;
  Var last;
  if (model_->config_.bidirectional) {
    std::vector<Var> bwd(S);
    Var g = t.constant(Tensor::vector(std::vector<double>(H, 0.0)));
    for (std::size_t i = S; i-- > 0;) {
      g = model_->enc_bwd_.step(enc_bwd_, emb[i], g);
      bwd[i] = g;
    }
    for (std::size_t i = 0; i < S; ++i) {
      const Var parts[2] = {fwd[i], bwd[i]};
      enc.states.push_back(t.concat(parts));
    }
    const Var ends[2] = {fwd[S - 1], bwd[0]};
    last = t.concat(ends);
  } else {
    enc.states = fwd;
    last = fwd[S - 1];
  }
  Var memory = t.stack_rows(enc.states);  // S x C
  enc.memory_t = transpose(memory);
  enc.keys = matmul(memory, transpose(att_enc_));
  enc.initial_state = tanh(affine(init_w_, last, init_b_));
  return enc;
}

Seq2SeqGraph::Step Seq2SeqGraph::decode_step(const Encoded& enc, Token prev, Var state,
                                             std::size_t step) {
  Tape& t = *tape_;
  if (prev < 0 || static_cast<std::size_t>(prev) >= model_->config_.target_vocab)
    throw std::out_of_range("seq2seq: target token " + std::to_string(prev) +
                            " outside vocabulary");
  Var d = matmul(att_dec_, state);
  Var e = tanh(add_rows(enc.keys, d));
  Var alpha = softmax(matmul(e, att_v_));
  Var ctx = matmul(enc.memory_t, alpha);
  const Var in[2] = {t.embedding(tgt_embed_, static_cast<std::size_t>(prev)), ctx};
  Var s = model_->dec_.step(dec_, t.concat(in), state);
  Var lp = log_softmax(affine(out_w_, s, out_b_), model_->masks_.at(step));
  return {lp, s, alpha};
}

Var Seq2SeqGraph::sequence_logprob(const Encoded& enc, std::span<const Token> target,
                                   std::vector<Var>* step_terms) {
  validate_target(target, model_->masks_, model_->config_.target_vocab);
  std::vector<Var> terms;
  terms.reserve(target.size());
  Var s = enc.initial_state;
  Token prev = kBos;
  for (std::size_t i = 0; i < target.size(); ++i) {
    Step st = decode_step(enc, prev, s, i);
    terms.push_back(pick(st.log_probs, static_cast<std::size_t>(target[i])));
    s = st.state;
    prev = target[i];
  }
  Var total = tape_->add_n(terms);
  if (step_terms) *step_terms = std::move(terms);
  return total;
}

namespace {

Token draw(const Tensor& log_probs, Rng& rng) {
  std::vector<double> w(log_probs.shape().numel());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double lp = log_probs.ptr()[i];
    w[i] = lp <= kMaskedLogProb ? 0.0 : std::exp(lp);
  }
  return static_cast<Token>(sample_categorical(rng, w));
}

}  // namespace

Seq2SeqGraph::TapeSample Seq2SeqGraph::sample(const Encoded& enc, Rng& rng) {
  TapeSample out;
  const std::size_t max_len = model_->masks_.constraints().max_len;
  Var s = enc.initial_state;
  Token prev = kBos;
  for (std::size_t i = 0; i < max_len; ++i) {
    Step st = decode_step(enc, prev, s, i);
    const Token tok = draw(st.log_probs.value(), rng);
    out.tokens.push_back(tok);
    out.step_logprobs.push_back(pick(st.log_probs, static_cast<std::size_t>(tok)));
    if (tok == kEos) {
      out.truncated = i + 1 == max_len;
      break;
    }
    s = st.state;
    prev = tok;
  }
  return out;
}

// The const inference paths bind parameters on no-gradient tapes, which never
// write to Parameter::grad.
std::vector<Tensor> Seq2Seq::encode_states(std::span<const Token> source) const {
  Tape tape(false);
  Seq2SeqGraph g(const_cast<Seq2Seq&>(*this), tape);
  auto enc = g.encode(source);
  std::vector<Tensor> out;
  for (Var v : enc.states) out.push_back(v.value());
  return out;
}

double Seq2Seq::sequence_logprob(std::span<const Token> source,
                                 std::span<const Token> target) const {
  Tape tape(false);
  Seq2SeqGraph g(const_cast<Seq2Seq&>(*this), tape);
  auto enc = g.encode(source);
  return g.sequence_logprob(enc, target).value().item();
}

Sample Seq2Seq::sample(std::span<const Token> source, Rng& rng) const {
  Tape tape(false);
  Seq2SeqGraph g(const_cast<Seq2Seq&>(*this), tape);
  auto enc = g.encode(source);
  auto ts = g.sample(enc, rng);
  Sample out;
  out.tokens = std::move(ts.tokens);
  out.truncated = ts.truncated;
  for (Var v : ts.step_logprobs) out.logprob += v.value().item();
  return out;
}

namespace {

struct Hypothesis {
  TokenSeq tokens;
  double logprob = 0.0;
  Var state;
};

struct Candidate {
  double score;
  std::size_t hyp;
  Token token;
};

}  // namespace

BeamResult Seq2Seq::beam_search(std::span<const Token> source, std::size_t beam) const {
  if (beam == 0) throw std::invalid_argument("beam_search: beam must be positive");
  Tape tape(false);
  Seq2SeqGraph g(const_cast<Seq2Seq&>(*this), tape);
  auto enc = g.encode(source);
  const std::size_t max_len = config_.constraints.max_len;
  const std::size_t V = config_.target_vocab;

  std::vector<Hypothesis> alive{{{}, 0.0, enc.initial_state}};
  BeamResult best;
  bool have_best = false;
  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Candidate> cands;
    std::vector<Var> states(alive.size());
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const Token prev = alive[h].tokens.empty() ? kBos : alive[h].tokens.back();
      auto st = g.decode_step(enc, prev, alive[h].state, step);
      states[h] = st.state;
      const double* lp = st.log_probs.value().ptr();
      for (std::size_t v = 0; v < V; ++v)
        if (lp[v] > kMaskedLogProb)
          cands.push_back({alive[h].logprob + lp[v], h, static_cast<Token>(v)});
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      TokenSeq toks = alive[c.hyp].tokens;
      toks.push_back(c.token);
      if (c.token == kEos) {
        if (!have_best || c.score > best.logprob) {
          best = {std::move(toks), c.score};
          have_best = true;
        }
      } else {
        next.push_back({std::move(toks), c.score, states[c.hyp]});
      }
    }
    alive = std::move(next);
    // Scores only fall as hypotheses grow, so nothing alive can overtake.
    if (have_best) {
      double top = -INFINITY;
      for (const auto& h : alive) top = std::max(top, h.logprob);
      if (top <= best.logprob) break;
    }
  }
  return best;
}

}  // namespace gbn
