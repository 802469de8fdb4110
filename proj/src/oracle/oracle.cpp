// SPDX-License-Identifier: Apache-2.0
#include "gbn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gbn/reward.hpp"

namespace gbn {

EnumSpace::EnumSpace(std::size_t content_vocab, std::size_t max_length, EnumOrder order)
    : content_vocab_(content_vocab), max_length_(max_length) {
  if (content_vocab == 0 || content_vocab > kEnumMaxVocab || max_length == 0 ||
      max_length > kEnumMaxLength)
    throw std::invalid_argument("EnumSpace: needs 1 <= V <= 8 and 1 <= T <= 4, got V=" +
                                std::to_string(content_vocab) + " T=" + std::to_string(max_length));
  std::vector<TokenSeq> frontier{{}};
  for (std::size_t len = 1; len <= max_length; ++len) {
    std::vector<TokenSeq> next;
    for (const auto& p : frontier)
      for (std::size_t v = 0; v < content_vocab; ++v) {
        TokenSeq s = p;
        s.push_back(kFirstContent + static_cast<Token>(v));
        next.push_back(std::move(s));
      }
    for (const auto& s : next) seqs_.push_back(with_eos(s));
    frontier = std::move(next);
  }
  if (order == EnumOrder::reversed) std::reverse(seqs_.begin(), seqs_.end());
}

std::size_t EnumSpace::index_of(std::span<const Token> y) const {
  for (std::size_t i = 0; i < seqs_.size(); ++i)
    if (std::equal(y.begin(), y.end(), seqs_[i].begin(), seqs_[i].end())) return i;
  return seqs_.size();
}

DecodeConstraints EnumSpace::constraints() const {
  DecodeConstraints c;
  c.max_len = max_length_ + 1;
  c.min_content = 1;
  c.banned = {kPad, kBos, kUnk};
  return c;
}

double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

namespace {

std::vector<double> kernels(std::span<const Token> target, double tau, const EnumSpace& space,
                            const TokenLM* lm) {
  std::vector<double> k(space.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    k[i] = lm ? lm_payoff_unnorm(space[i], target, tau, *lm)
              : uniform_payoff_unnorm(space[i], target, tau);
  return k;
}

void check_aligned(const DenseDist& d, const EnumSpace& space) {
  if (d.p.size() != space.size())
    throw std::invalid_argument("oracle: distribution does not match the space");
}

}  // namespace

double partition_Z(std::span<const Token> target, double tau, const EnumSpace& space,
                   const TokenLM* lm) {
  return ordered_sum(kernels(target, tau, space, lm));
}

DenseDist exact_payoff(std::span<const Token> target, double tau, const EnumSpace& space,
                       const TokenLM* lm) {
  auto k = kernels(target, tau, space, lm);
  const double z = ordered_sum(k);
  for (double& v : k) v /= z;
  return {std::move(k)};
}

DenseDist uniform_dist(const EnumSpace& space) {
  return {std::vector<double>(space.size(), 1.0 / static_cast<double>(space.size()))};
}

DenseDist delta_dist(std::span<const Token> target, const EnumSpace& space) {
  const std::size_t i = space.index_of(target);
  if (i == space.size()) throw std::invalid_argument("delta_dist: target outside the space");
  DenseDist d{std::vector<double>(space.size(), 0.0)};
  d.p[i] = 1.0;
  return d;
}

DenseDist network_dist(const Seq2Seq& model, std::span<const Token> source, const EnumSpace& space) {
  DenseDist d{std::vector<double>(space.size())};
  for (std::size_t i = 0; i < space.size(); ++i)
    d.p[i] = std::exp(model.sequence_logprob(source, space[i]));
  return d;
}

double total_mass(const DenseDist& d) { return ordered_sum(d.p); }

double exact_kl(const DenseDist& p, const DenseDist& q) {
  if (p.p.size() != q.p.size()) throw std::invalid_argument("exact_kl: size mismatch");
  std::vector<double> terms;
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    if (p.p[i] == 0.0) continue;
    if (q.p[i] <= 0.0) throw std::invalid_argument("exact_kl: q is zero where p is positive");
    terms.push_back(p.p[i] * std::log(p.p[i] / q.p[i]));
  }
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

double exact_expected_neg_reward(const DenseDist& q, std::span<const Token> target, double tau,
                                 const EnumSpace& space) {
  check_aligned(q, space);
  double e = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (q.p[i] != 0.0) e -= q.p[i] * similarity_score(content(space[i]), content(target)) / tau;
  return e;
}

double exact_bridge_loss(const DenseDist& q, std::span<const Token> target, double tau,
                         const DenseDist& constraint, const EnumSpace& space) {
  check_aligned(constraint, space);
  return exact_expected_neg_reward(q, target, tau, space) + exact_kl(q, constraint);
}

CoachingGradient exact_coaching_gradient(Seq2Seq& bridge, std::span<const Token> target,
                                         const DenseDist& gen_dist, double tau,
                                         const EnumSpace& space, RewardMode mode,
                                         double constant_reward) {
  check_aligned(gen_dist, space);
  if (!(tau > 0.0)) throw std::invalid_argument("exact_coaching_gradient: tau must be positive");
  const auto source = content(target);
  const DenseDist own = network_dist(bridge, source, space);
  CoachingGradient out;

  bridge.params().zero_grad();
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (own.p[i] == 0.0) continue;
    const TokenSeq& y = space[i];
    std::vector<double> r;
    if (mode == RewardMode::step) {
      r = stepwise_rewards(y, target);
    } else {
      r.assign(y.size(), mode == RewardMode::sequence ? similarity_score(content(y), source)
                                                      : constant_reward);
    }
    Tape tape;
    Seq2SeqGraph g(bridge, tape);
    auto enc = g.encode(source);
    std::vector<Var> steps;
    g.sequence_logprob(enc, y, &steps);
    std::vector<Var> terms;
    for (std::size_t t = 0; t < steps.size(); ++t)
      terms.push_back((-own.p[i] * r[t] / tau) * steps[t]);
    tape.backward(tape.add_n(terms));
  }
  out.reinforce = bridge.params().snapshot_grads();

  bridge.params().zero_grad();
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (gen_dist.p[i] == 0.0) continue;
    Tape tape;
    Seq2SeqGraph g(bridge, tape);
    auto enc = g.encode(source);
    tape.backward((-gen_dist.p[i]) * g.sequence_logprob(enc, space[i]));
  }
  out.kl = bridge.params().snapshot_grads();
  bridge.params().zero_grad();

  out.total = out.reinforce;
  for (std::size_t p = 0; p < out.total.size(); ++p)
    for (std::size_t j = 0; j < out.total[p].size(); ++j)
      out.total[p].data()[j] += out.kl[p].data()[j];
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

DenseDist perturb(const DenseDist& q, Rng& rng) {
  DenseDist d = q;
  for (double& v : d.p) v *= 1.0 + uniform(rng, -0.5, 0.5);
  const double z = ordered_sum(d.p);
  for (double& v : d.p) v /= z;
  return d;
}

Seq2SeqConfig small_net(const EnumSpace& space, std::size_t source_vocab) {
  Seq2SeqConfig c;
  c.source_vocab = source_vocab;
  c.target_vocab = space.vocab();
  c.embed_dim = 4;
  c.hidden_dim = 5;
  c.constraints = space.constraints();
  return c;
}

double max_rel_diff(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double worst = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t j = 0; j < a[p].size(); ++j)
      worst = std::max(worst, std::abs(a[p].data()[j] - b[p].data()[j]) /
                                  std::max(1.0, std::abs(b[p].data()[j])));
  return worst;
}

// Central differences of f with respect to every parameter element.
std::vector<Tensor> fd_gradient(ParamSet& ps, const std::function<double()>& f, double h = 1e-5) {
  std::vector<Tensor> g;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    Tensor t = Tensor::zeros_like(ps[p].value);
    auto vals = ps[p].value.data();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double x = vals[j];
      vals[j] = x + h;
      const double up = f();
      vals[j] = x - h;
      const double down = f();
      vals[j] = x;
      t.data()[j] = (up - down) / (2 * h);
    }
    g.push_back(std::move(t));
  }
  return g;
}

}  // namespace

std::vector<SuiteCheck> run_equivalence_suite(std::uint64_t seed) {
  std::vector<SuiteCheck> out;
  Rng rng(seed);
  const EnumSpace space(4, 3), rev(4, 3, EnumOrder::reversed);
  const TokenSeq target{4, 6, 5, kEos};

  {
    SuiteCheck c{"payoff normalization and enumeration order", true, ""};
    for (double tau : {0.4, 0.8, 1.2}) {
      const double z1 = partition_Z(target, tau, space), z2 = partition_Z(target, tau, rev);
      const double err = std::abs(total_mass(exact_payoff(target, tau, space)) - 1.0);
      c.passed = c.passed && z1 == z2 && err <= 1e-12;
      c.detail += "tau=" + fmt(tau) + " Z=" + fmt(z1) + " err=" + fmt(err) + "; ";
    }
    out.push_back(c);
  }

  {
    SuiteCheck c{"closed-form payoffs minimize the bridge loss", true, ""};
    const UniformLM flat(space.content_vocab(), space.max_length());
    LmConfig lc;
    lc.vocab = space.vocab();
    lc.embed_dim = 4;
    lc.hidden_dim = 5;
    Rng init(seed + 1);
    GruLM lm(lc, init);
    for (std::size_t i = 0; i < lm.params().size(); ++i)
      for (double& v : lm.params()[i].value.data()) v *= 10.0;
    std::size_t wins = 0, total = 0;
    for (double tau : {0.4, 0.8, 1.2}) {
      for (const TokenLM* l : {static_cast<const TokenLM*>(nullptr), static_cast<const TokenLM*>(&lm)}) {
        const DenseDist q = exact_payoff(target, tau, space, l);
        DenseDist constraint = uniform_dist(space);
        if (l) {
          for (std::size_t i = 0; i < space.size(); ++i) constraint.p[i] = std::exp(l->seq_logprob(space[i]));
          const double z = ordered_sum(constraint.p);
          for (double& v : constraint.p) v /= z;
        }
        const double best = exact_bridge_loss(q, target, tau, constraint, space);
        for (int k = 0; k < 100; ++k) {
          ++total;
          if (best < exact_bridge_loss(perturb(q, rng), target, tau, constraint, space)) ++wins;
        }
      }
    }
    // The flat LM stub gives the same normalized payoff as the uniform kernel.
    const auto a = exact_payoff(target, 0.8, space), b = exact_payoff(target, 0.8, space, &flat);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.p.size(); ++i) diff = std::max(diff, std::abs(a.p[i] - b.p[i]));
    c.passed = wins == total && diff <= 1e-12;
    c.detail = std::to_string(wins) + "/" + std::to_string(total) + " wins, flat-LM diff " + fmt(diff);
    out.push_back(c);
  }

  {
    SuiteCheck c{"stratified sampler follows its two-stage law", true, ""};
    BridgeConfig cfg;
    cfg.tau = 0.8;
    cfg.m_max = 3;
    const TokenSeq ref{4, 5, 6, kEos};
    const std::size_t vocab = kNumSpecials + 4;
    std::map<TokenSeq, double> freq;
    const int n = 50000;
    for (int i = 0; i < n; ++i) freq[stratified_sample_uniform(ref, cfg, vocab, rng).tokens] += 1.0 / n;
    const EnumSpace same_len(4, 3);
    double tv = 0.0, mass = 0.0;
    for (const auto& y : same_len.sequences()) {
      if (y.size() != ref.size()) continue;
      const double p = stratified_uniform_prob(y, ref, cfg, vocab);
      mass += p;
      tv += std::abs(p - (freq.count(y) ? freq[y] : 0.0));
    }
    tv *= 0.5;
    c.passed = tv <= 0.03 && std::abs(mass - 1.0) <= 1e-12;
    c.detail = "TV=" + fmt(tv) + " at " + std::to_string(n) + " draws, law mass " + fmt(mass);
    out.push_back(c);
  }

  const EnumSpace tiny(3, 2);
  const TokenSeq tiny_target{4, 5, kEos};
  Rng init(seed + 2);
  Seq2Seq bridge(small_net(tiny, tiny.vocab()), init);
  for (std::size_t i = 0; i < bridge.params().size(); ++i)
    for (double& v : bridge.params()[i].value.data()) v *= 10.0;
  Seq2Seq generator(small_net(tiny, 7), init);
  for (std::size_t i = 0; i < generator.params().size(); ++i)
    for (double& v : generator.params()[i].value.data()) v *= 10.0;
  const TokenSeq source{4, 6, 5};

  {
    SuiteCheck c{"network distributions normalize on the space", true, ""};
    const double m1 = total_mass(network_dist(bridge, content(tiny_target), tiny));
    const double m2 = total_mass(network_dist(generator, source, tiny));
    c.passed = std::abs(m1 - 1.0) <= 1e-10 && std::abs(m2 - 1.0) <= 1e-10;
    c.detail = "bridge " + fmt(m1) + ", generator " + fmt(m2);
    out.push_back(c);
  }

  {
    SuiteCheck c{"coaching KL term is the gradient of KL(gen || bridge)", true, ""};
    const DenseDist gen = network_dist(generator, source, tiny);
    const auto g = exact_coaching_gradient(bridge, tiny_target, gen, 0.8, tiny, RewardMode::step);
    const auto fd = fd_gradient(bridge.params(), [&] {
      return exact_kl(gen, network_dist(bridge, content(tiny_target), tiny));
    });
    const double err = max_rel_diff(g.kl, fd);
    c.passed = err <= 1e-4;
    c.detail = "max rel err " + fmt(err);
    out.push_back(c);
  }

  {
    SuiteCheck c{"sequence-reward term is the gradient of E[-S/tau]", true, ""};
    const DenseDist gen = network_dist(generator, source, tiny);
    const auto g = exact_coaching_gradient(bridge, tiny_target, gen, 0.8, tiny, RewardMode::sequence);
    const auto fd = fd_gradient(bridge.params(), [&] {
      return exact_expected_neg_reward(network_dist(bridge, content(tiny_target), tiny),
                                       tiny_target, 0.8, tiny);
    });
    const double err = max_rel_diff(g.reinforce, fd);
    c.passed = err <= 1e-4;
    c.detail = "max rel err " + fmt(err);
    out.push_back(c);
  }

  {
    SuiteCheck c{"expected generator update is the gradient of KL(bridge || gen)", true, ""};
    const DenseDist q = exact_payoff(tiny_target, 0.8, tiny);
    generator.params().zero_grad();
    for (std::size_t i = 0; i < tiny.size(); ++i) {
      Tape tape;
      Seq2SeqGraph g(generator, tape);
      auto enc = g.encode(source);
      tape.backward((-q.p[i]) * g.sequence_logprob(enc, tiny[i]));
    }
    const auto expected = generator.params().snapshot_grads();
    generator.params().zero_grad();
    const auto fd = fd_gradient(generator.params(),
                                [&] { return exact_kl(q, network_dist(generator, source, tiny)); });
    const double err = max_rel_diff(expected, fd);
    c.passed = err <= 1e-4;
    c.detail = "max rel err " + fmt(err);
    out.push_back(c);
  }
  return out;
}

}  // namespace gbn
