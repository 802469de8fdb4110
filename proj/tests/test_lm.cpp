// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "gbn/grad_check.hpp"
#include "gbn/language_model.hpp"
#include "gbn/log.hpp"
#include "gbn/oracle.hpp"

using namespace gbn;

namespace {

GruLM make_lm(std::size_t vocab, std::uint64_t seed, double scale = 1.0) {
  LmConfig c;
  c.vocab = vocab;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  Rng rng(seed);
  GruLM lm(c, rng);
  for (std::size_t i = 0; i < lm.params().size(); ++i)
    for (double& v : lm.params()[i].value.data()) v *= scale;
  return lm;
}

// Sentences from a sparse first-order chain over content tokens 4..9.
std::vector<TokenSeq> chain_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSeq s;
    Token t = 4 + static_cast<Token>(uniform_index(rng, 2));
    const std::size_t len = 3 + uniform_index(rng, 4);
    for (std::size_t k = 0; k < len; ++k) {
      s.push_back(t);
      t = 4 + (t - 4 + 1 + static_cast<Token>(uniform_index(rng, 2))) % 6;
    }
    s.push_back(kEos);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("step distributions") {
  auto lm = make_lm(10, 1, 10.0);
  const TokenSeq prefix{kBos, 5, 7};
  auto p = lm.step_dist(prefix);
  double s = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    s += v;
  }
  CHECK(std::abs(s - 1.0) < 1e-10);
  CHECK(lm.step_dist(prefix) == p);
  CHECK_THROWS(lm.step_dist(TokenSeq{5, 7}));
  CHECK_THROWS(lm.step_dist(TokenSeq{}));
}

TEST_CASE("sequence log-probability") {
  auto lm = make_lm(7, 2, 10.0);
  const TokenSeq y{5, 6, 4, kEos};
  double manual = 0.0;
  TokenSeq prefix{kBos};
  for (Token t : y) {
    manual += std::log(lm.step_dist(prefix)[static_cast<std::size_t>(t)]);
    prefix.push_back(t);
  }
  CHECK(std::abs(lm.seq_logprob(y) - manual) < 1e-12);
  // Tape and cursor paths agree.
  Tape tape(false);
  CHECK(std::abs(lm.seq_logprob(tape, y).value().item() - lm.seq_logprob(y)) < 1e-12);
  // Prefix sums are monotone.
  CHECK(lm.seq_logprob(TokenSeq{5, 6}) >= lm.seq_logprob(y));
  CHECK_THROWS(lm.seq_logprob(TokenSeq{}));
  CHECK_THROWS(lm.seq_logprob(TokenSeq{5, 40, kEos}));

  const EnumSpace space(3, 4);
  double total = 0.0;
  for (const auto& s : space.sequences()) total += std::exp(lm.seq_logprob(s));
  CHECK(total <= 1.0);
  CHECK(total > 0.0);
}

TEST_CASE("uniform LM stub") {
  const UniformLM u(3, 3);
  const EnumSpace space(3, 3);
  double total = 0.0;
  const double first = u.seq_logprob(space[0]);
  for (const auto& s : space.sequences()) {
    CHECK(std::abs(u.seq_logprob(s) - first) < 1e-12);
    total += std::exp(u.seq_logprob(s));
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(std::abs(first + std::log(static_cast<double>(space.size()))) < 1e-12);
  CHECK(u.seq_logprob(TokenSeq{4, 4, 4, 4, kEos}) == -INFINITY);
}

TEST_CASE("gradient check through the LM") {
  auto lm = make_lm(7, 3, 5.0);
  const TokenSeq y{4, 6, 5, kEos};
  auto r = grad_check(lm.params(), [&](Tape& t) { return -1.0 * lm.seq_logprob(t, y); });
  CHECK_MESSAGE(r.passed, r.max_rel_error);
}

TEST_CASE("training on one repeated sentence drives perplexity to one") {
  auto lm = make_lm(8, 4);
  Adadelta opt(lm.params());
  const std::vector<TokenSeq> corpus(16, TokenSeq{4, 7, 5, 6, kEos});
  LmTrainOptions o;
  o.epochs = 60;
  o.batch_size = 4;
  const auto saved = log_level();
  set_log_level(LogLevel::quiet);
  const auto logs = lm_train(lm, opt, corpus, corpus, o);
  set_log_level(saved);
  REQUIRE(logs.size() == 60);
  CHECK(logs.back().heldout_perplexity < 1.05);
  CHECK(logs.back().heldout_perplexity >= 1.0);
  CHECK(std::abs(perplexity(lm, corpus) - logs.back().heldout_perplexity) < 1e-12);
  CHECK(std::abs(perplexity(lm, corpus) - std::exp(-lm.seq_logprob(corpus[0]) / 5)) < 1e-12);
}

TEST_CASE("held-out perplexity falls over the first epochs") {
  auto lm = make_lm(10, 5);
  Adadelta opt(lm.params());
  const auto train = chain_corpus(400, 6), dev = chain_corpus(100, 7);
  LmTrainOptions o;
  o.epochs = 3;
  o.batch_size = 16;
  const auto saved = log_level();
  set_log_level(LogLevel::quiet);
  const auto logs = lm_train(lm, opt, train, dev, o);
  set_log_level(saved);
  const double before = 10.0;  // near-uniform init over 10 tokens
  CHECK(logs[0].heldout_perplexity < before);
  CHECK(logs[1].heldout_perplexity < logs[0].heldout_perplexity);
  CHECK(logs[2].heldout_perplexity < logs[1].heldout_perplexity);
  CHECK_THROWS(lm_train(lm, opt, std::vector<TokenSeq>{}, dev, o));
}
