// SPDX-License-Identifier: Apache-2.0
#include "gbn/bridges.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gbn/log.hpp"
#include "gbn/reward.hpp"

namespace gbn {

BridgeKind parse_bridge_kind(std::string_view name) {
  if (name == "delta") return BridgeKind::delta;
  if (name == "uniform") return BridgeKind::uniform;
  if (name == "lm") return BridgeKind::lm;
  if (name == "coaching") return BridgeKind::coaching;
  throw std::invalid_argument("unknown bridge kind '" + std::string(name) + "'");
}

std::string bridge_kind_name(BridgeKind kind) {
  switch (kind) {
    case BridgeKind::delta: return "delta";
    case BridgeKind::uniform: return "uniform";
    case BridgeKind::lm: return "lm";
    case BridgeKind::coaching: return "coaching";
  }
  return "?";
}

void validate(const BridgeConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("bridge: tau must be positive");
  if (cfg.K == 0) throw std::invalid_argument("bridge: K must be at least 1");
}

std::size_t resolve_m_max(const BridgeConfig& cfg, std::size_t len) {
  if (cfg.m_max < 0) return static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(len)));
  const auto m = static_cast<std::size_t>(cfg.m_max);
  if (m > len)
    throw std::invalid_argument("bridge: m_max " + std::to_string(m) + " exceeds length " +
                                std::to_string(len));
  return m;
}

namespace {

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

std::size_t content_count(std::size_t vocab) {
  if (vocab < kNumSpecials + 2)
    throw std::invalid_argument("bridge: need at least two content tokens to substitute");
  return vocab - kNumSpecials;
}

// Picks m distinct positions out of len, returned ascending.
std::vector<std::size_t> choose_positions(std::size_t len, std::size_t m, Rng& rng) {
  std::vector<std::size_t> idx(len);
  for (std::size_t i = 0; i < len; ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniform_index(rng, len - i)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct Stages {
  TokenSeq tokens;
  std::size_t m;
  std::vector<std::size_t> positions;
};

Stages first_stages(std::span<const Token> target, const BridgeConfig& cfg, Rng& rng) {
  validate(cfg);
  const auto body = content(target);
  const std::size_t len = body.size();
  const std::size_t m_max = resolve_m_max(cfg, len);
  Stages s{TokenSeq(target.begin(), target.end()), 0, {}};
  if (body.size() == target.size()) s.tokens.push_back(kEos);
  if (len == 0) return s;
  const auto q = edit_distance_law(len, cfg.tau, m_max);
  s.m = sample_categorical(rng, q);
  s.positions = choose_positions(len, s.m, rng);
  return s;
}

}  // namespace

std::vector<double> edit_distance_law(std::size_t len, double tau, std::size_t m_max) {
  if (!(tau > 0.0)) throw std::invalid_argument("edit_distance_law: tau must be positive");
  if (m_max > len) throw std::invalid_argument("edit_distance_law: m_max exceeds length");
  std::vector<double> logw(m_max + 1);
  for (std::size_t m = 0; m <= m_max; ++m)
    logw[m] = log_choose(len, m) -
              (len == 0 ? 0.0 : static_cast<double>(m) / (tau * static_cast<double>(len)));
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> q(m_max + 1);
  double z = 0.0;
  for (std::size_t m = 0; m <= m_max; ++m) z += q[m] = std::exp(logw[m] - top);
  for (double& v : q) v /= z;
  return q;
}

TokenSeq delta_sample(std::span<const Token> target) { return {target.begin(), target.end()}; }

StratifiedSample stratified_sample_uniform(std::span<const Token> target, const BridgeConfig& cfg,
                                           std::size_t vocab, Rng& rng) {
  const std::size_t nc = content_count(vocab);
  Stages s = first_stages(target, cfg, rng);
  for (std::size_t p : s.positions) {
    const Token orig = s.tokens[p];
    // Uniform over the nc - 1 content tokens other than orig (orig itself may
    // be UNK or out of the content range, in which case all nc are eligible).
    const bool orig_content = orig >= kFirstContent && static_cast<std::size_t>(orig) < vocab;
    auto r = static_cast<Token>(uniform_index(rng, orig_content ? nc - 1 : nc)) + kFirstContent;
    if (orig_content && r >= orig) ++r;
    s.tokens[p] = r;
  }
  return {std::move(s.tokens), s.m, std::move(s.positions)};
}

double stratified_uniform_prob(std::span<const Token> y, std::span<const Token> target,
                               const BridgeConfig& cfg, std::size_t vocab) {
  validate(cfg);
  const double nc = static_cast<double>(content_count(vocab));
  const auto a = content(y), b = content(target);
  if (a.size() != b.size()) return 0.0;
  const std::size_t len = b.size();
  std::size_t m = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (a[i] == b[i]) continue;
    if (a[i] < kFirstContent || static_cast<std::size_t>(a[i]) >= vocab) return 0.0;
    ++m;
  }
  const std::size_t m_max = resolve_m_max(cfg, len);
  if (m > m_max) return 0.0;
  if (len == 0) return 1.0;
  for (Token t : b)
    if (t < kFirstContent || static_cast<std::size_t>(t) >= vocab)
      throw std::invalid_argument("stratified_uniform_prob: reference has non-content tokens");
  const auto q = edit_distance_law(len, cfg.tau, m_max);
  return q[m] * std::exp(-log_choose(len, m)) * std::pow(nc - 1.0, -static_cast<double>(m));
}

StratifiedSample stratified_sample_lm(std::span<const Token> target, const BridgeConfig& cfg,
                                      const TokenLM& lm, Rng& rng) {
  const std::size_t vocab = lm.vocab_size();
  content_count(vocab);
  Stages s = first_stages(target, cfg, rng);
  if (s.positions.empty()) return {std::move(s.tokens), s.m, {}};
  Tensor state = lm.start();
  std::size_t next = 0;
  const std::size_t last = s.positions.back();
  for (std::size_t i = 0; i <= last; ++i) {
    if (next < s.positions.size() && s.positions[next] == i) {
      ++next;
      const auto lp = lm.log_probs(state);
      std::vector<double> w(vocab, 0.0);
      for (std::size_t v = kFirstContent; v < vocab; ++v)
        if (static_cast<Token>(v) != s.tokens[i]) w[v] = std::exp(lp[v]);
      s.tokens[i] = static_cast<Token>(sample_categorical(rng, w));
    }
    if (i < last) state = lm.advance(state, s.tokens[i]);
  }
  return {std::move(s.tokens), s.m, std::move(s.positions)};
}

double uniform_payoff_unnorm(std::span<const Token> y, std::span<const Token> target, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("uniform_payoff_unnorm: tau must be positive");
  return std::exp(similarity_score(content(y), content(target)) / tau);
}

double lm_payoff_unnorm(std::span<const Token> y, std::span<const Token> target, double tau,
                        const TokenLM& lm) {
  if (!(tau > 0.0)) throw std::invalid_argument("lm_payoff_unnorm: tau must be positive");
  return std::exp(lm.seq_logprob(y) + similarity_score(content(y), content(target)) / tau);
}

double bridge_density(BridgeKind kind, std::span<const Token> y, std::span<const Token> target,
                      const BridgeConfig& cfg, const BridgeNets& nets) {
  switch (kind) {
    case BridgeKind::delta:
      return std::equal(y.begin(), y.end(), target.begin(), target.end()) ? 1.0 : 0.0;
    case BridgeKind::uniform:
      return uniform_payoff_unnorm(y, target, cfg.tau);
    case BridgeKind::lm:
      if (!nets.lm) throw std::invalid_argument("bridge_density: lm bridge needs a language model");
      return lm_payoff_unnorm(y, target, cfg.tau, *nets.lm);
    case BridgeKind::coaching:
      if (!nets.coaching) throw std::invalid_argument("bridge_density: coaching bridge needs a network");
      return std::exp(nets.coaching->sequence_logprob(content(target), y));
  }
  return 0.0;
}

Sample coaching_sample(std::span<const Token> target, const Seq2Seq& bridge, Rng& rng) {
  return bridge.sample(content(target), rng);
}

std::vector<TokenSeq> draw_bridge_samples(std::span<const Token> target, const BridgeConfig& cfg,
                                          const BridgeNets& nets, std::size_t vocab, Rng& rng) {
  validate(cfg);
  std::vector<TokenSeq> out;
  out.reserve(cfg.K);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    switch (cfg.kind) {
      case BridgeKind::delta:
        out.push_back(delta_sample(target));
        break;
      case BridgeKind::uniform:
        out.push_back(stratified_sample_uniform(target, cfg, vocab, rng).tokens);
        break;
      case BridgeKind::lm:
        if (!nets.lm) throw std::invalid_argument("lm bridge needs a language model");
        out.push_back(stratified_sample_lm(target, cfg, *nets.lm, rng).tokens);
        break;
      case BridgeKind::coaching:
        if (!nets.coaching) throw std::invalid_argument("coaching bridge needs a network");
        out.push_back(coaching_sample(target, *nets.coaching, rng).tokens);
        break;
    }
  }
  return out;
}

CoachingLosses coaching_gradients(std::span<const CoachingItem> batch, Seq2Seq& bridge,
                                  const Seq2Seq& generator, const CoachingOptions& options,
                                  Rng& rng, CoachingState* state) {
  if (batch.empty()) throw std::invalid_argument("coaching: empty batch");
  if (!(options.tau > 0.0)) throw std::invalid_argument("coaching: tau must be positive");
  if (options.use_reinforce && options.reinforce_samples == 0)
    throw std::invalid_argument("coaching: reinforce_samples must be positive");
  if (options.use_kl && options.kl_samples == 0)
    throw std::invalid_argument("coaching: kl_samples must be positive");
  bridge.params().zero_grad();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  CoachingLosses out;
  std::size_t reward_count = 0;
  for (const CoachingItem& item : batch) {
    Tape tape;
    Seq2SeqGraph g(bridge, tape);
    auto enc = g.encode(content(item.target));
    std::vector<Var> terms;
    if (options.use_reinforce) {
      const double w = inv_b / static_cast<double>(options.reinforce_samples);
      for (std::size_t a = 0; a < options.reinforce_samples; ++a) {
        auto ts = g.sample(enc, rng);
        const double S = similarity_score(content(ts.tokens), content(item.target));
        out.mean_reward += S;
        ++reward_count;
        std::vector<double> r;
        if (options.reward == RewardMode::step)
          r = stepwise_rewards(ts.tokens, item.target);
        else
          r.assign(ts.tokens.size(),
                   options.reward == RewardMode::sequence ? S : options.constant_reward);
        if (options.baseline && state) {
          if (state->baseline.size() < r.size()) {
            state->baseline.resize(r.size(), 0.0);
            state->seen.resize(r.size(), false);
          }
          for (std::size_t t = 0; t < r.size(); ++t) {
            const double b = state->seen[t] ? state->baseline[t] : r[t];
            const double raw = r[t];
            r[t] -= b;
            state->baseline[t] = state->seen[t] ? options.baseline_decay * b +
                                                      (1 - options.baseline_decay) * raw
                                                : raw;
            state->seen[t] = true;
          }
        }
        for (std::size_t t = 0; t < r.size(); ++t) {
          Var term = (-r[t] / options.tau * w) * ts.step_logprobs[t];
          out.reinforce += term.value().item();
          terms.push_back(term);
        }
      }
    }
    if (options.use_kl) {
      const double w = inv_b / static_cast<double>(options.kl_samples);
      for (std::size_t k = 0; k < options.kl_samples; ++k) {
        const Sample ygen = generator.sample(item.source, rng);
        Var term = (-w) * g.sequence_logprob(enc, ygen.tokens);
        out.kl += term.value().item();
        terms.push_back(term);
      }
    }
    if (!terms.empty()) tape.backward(tape.add_n(terms));
  }
  if (reward_count) out.mean_reward /= static_cast<double>(reward_count);
  return out;
}

CoachingLosses coaching_update(std::span<const CoachingItem> batch, Seq2Seq& bridge,
                               const Seq2Seq& generator, const CoachingOptions& options,
                               Adadelta& bridge_opt, Rng& rng, CoachingState* state) {
  CoachingLosses out = coaching_gradients(batch, bridge, generator, options, rng, state);
  if (!std::isfinite(out.reinforce) || !std::isfinite(out.kl)) {
    log_warn("skipping coaching update: non-finite loss");
    return out;
  }
  out.applied = bridge_opt.step();
  return out;
}

}  // namespace gbn
