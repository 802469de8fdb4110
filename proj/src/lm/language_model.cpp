// SPDX-License-Identifier: Apache-2.0
#include "gbn/language_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gbn/log.hpp"

namespace gbn {

std::vector<double> TokenLM::step_dist(std::span<const Token> prefix) const {
  if (prefix.empty() || prefix[0] != kBos)
    throw std::invalid_argument("lm step_dist: prefix must start with BOS");
  Tensor s = start();
  for (std::size_t i = 1; i < prefix.size(); ++i) s = advance(s, prefix[i]);
  auto lp = log_probs(s);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

double TokenLM::seq_logprob(std::span<const Token> y) const {
  if (y.empty()) throw std::invalid_argument("lm seq_logprob: empty sequence");
  Tensor s = start();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto lp = log_probs(s);
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= lp.size())
      throw std::out_of_range("lm: token outside vocabulary");
    total += lp[static_cast<std::size_t>(y[i])];
    if (i + 1 < y.size()) s = advance(s, y[i]);
  }
  return total;
}

UniformLM::UniformLM(std::size_t content_vocab, std::size_t max_content)
    : content_vocab_(content_vocab), max_content_(max_content), completions_(max_content + 1) {
  if (content_vocab == 0 || max_content == 0)
    throw std::invalid_argument("UniformLM: needs content tokens and a positive length");
  completions_[max_content] = 1.0;
  for (std::size_t k = max_content; k-- > 0;)
    completions_[k] = (k > 0 ? 1.0 : 0.0) + static_cast<double>(content_vocab) * completions_[k + 1];
}

Tensor UniformLM::advance(const Tensor& s, Token t) const {
  if (t < kFirstContent || static_cast<std::size_t>(t) >= vocab_size())
    return Tensor::vector({-1.0});  // left the support
  const double k = s.item();
  return Tensor::vector({k < 0 ? k : k + 1.0});
}

std::vector<double> UniformLM::log_probs(const Tensor& s) const {
  std::vector<double> lp(vocab_size(), -INFINITY);
  const double kd = s.item();
  if (kd < 0 || kd > static_cast<double>(max_content_)) return lp;
  const auto k = static_cast<std::size_t>(kd);
  if (k > 0) lp[kEos] = -std::log(completions_[k]);
  if (k < max_content_)
    for (std::size_t v = kFirstContent; v < vocab_size(); ++v)
      lp[v] = std::log(completions_[k + 1] / completions_[k]);
  return lp;
}

GruLM::GruLM(const LmConfig& config, Rng& init_rng) : config_(config) {
  if (config.vocab <= kNumSpecials) throw std::invalid_argument("lm: vocabulary too small");
  embed_ = &params_.add("lm_embed", Shape{config.vocab, config.embed_dim});
  gru_ = GruLayer(params_, "lm_gru", config.embed_dim, config.hidden_dim);
  out_w_ = &params_.add("lm_out_w", Shape{config.vocab, config.hidden_dim});
  out_b_ = &params_.add("lm_out_b", Shape{config.vocab});
  params_.init_uniform(init_rng);
}

void GruLM::check_token(Token t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab)
    throw std::out_of_range("lm: token " + std::to_string(t) + " outside vocabulary");
}

// Const queries run on no-gradient tapes, which never write Parameter::grad.
Tensor GruLM::start() const {
  return advance(Tensor::vector(std::vector<double>(config_.hidden_dim, 0.0)), kBos);
}

Tensor GruLM::advance(const Tensor& state, Token t) const {
  check_token(t);
  Tape tape(false);
  auto& self = const_cast<GruLM&>(*this);
  auto b = gru_.bind(tape);
  Var x = tape.embedding(tape.param(*self.embed_), static_cast<std::size_t>(t));
  return gru_.step(b, x, tape.constant(state)).value();
}

std::vector<double> GruLM::log_probs(const Tensor& state) const {
  Tape tape(false);
  auto& self = const_cast<GruLM&>(*this);
  Var lp = log_softmax(affine(tape.param(*self.out_w_), tape.constant(state),
                              tape.param(*self.out_b_)));
  auto d = lp.value().data();
  return {d.begin(), d.end()};
}

double GruLM::seq_logprob(std::span<const Token> y) const {
  Tape tape(false);
  return const_cast<GruLM&>(*this).seq_logprob(tape, y).value().item();
}

Var GruLM::seq_logprob(Tape& tape, std::span<const Token> y) {
  if (y.empty()) throw std::invalid_argument("lm seq_logprob: empty sequence");
  Var emb = tape.param(*embed_);
  auto b = gru_.bind(tape);
  Var w = tape.param(*out_w_), bias = tape.param(*out_b_);
  Var h = tape.constant(Tensor::vector(std::vector<double>(config_.hidden_dim, 0.0)));
  std::vector<Var> terms;
  Token prev = kBos;
  for (Token t : y) {
    check_token(t);
    h = gru_.step(b, tape.embedding(emb, static_cast<std::size_t>(prev)), h);
    terms.push_back(pick(log_softmax(affine(w, h, bias)), static_cast<std::size_t>(t)));
    prev = t;
  }
  return tape.add_n(terms);
}

double perplexity(const TokenLM& lm, std::span<const TokenSeq> corpus) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& y : corpus) {
    nll -= lm.seq_logprob(y);
    tokens += y.size();
  }
  return std::exp(nll / static_cast<double>(tokens));
}

std::vector<LmEpochLog> lm_train(GruLM& lm, Adadelta& opt, std::span<const TokenSeq> corpus,
                                 std::span<const TokenSeq> heldout, const LmTrainOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("lm_train: empty corpus");
  if (options.batch_size == 0) throw std::invalid_argument("lm_train: batch_size must be positive");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.shuffle_seed);
  std::vector<LmEpochLog> logs;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::size_t batch_tokens = 0;
      for (std::size_t i = start; i < end; ++i) batch_tokens += corpus[order[i]].size();
      lm.params().zero_grad();
      double batch_nll = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        Tape tape;
        Var loss = (-1.0 / static_cast<double>(batch_tokens)) * lm.seq_logprob(tape, corpus[order[i]]);
        tape.backward(loss);
        batch_nll += loss.value().item() * static_cast<double>(batch_tokens);
      }
      nll += batch_nll;
      tokens += batch_tokens;
      opt.step();
    }
    LmEpochLog row{epoch, std::exp(nll / static_cast<double>(tokens)), 0.0};
    if (!heldout.empty()) row.heldout_perplexity = perplexity(lm, heldout);
    log_info("lm epoch " + std::to_string(epoch) + " train ppl " +
             std::to_string(row.train_perplexity) + " heldout ppl " +
             std::to_string(row.heldout_perplexity));
    logs.push_back(row);
  }
  return logs;
}

}  // namespace gbn
