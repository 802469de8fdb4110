// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gbn/reward.hpp"
#include "gbn/rng.hpp"

using namespace gbn;

namespace {

constexpr Token a = 4, b = 5, c = 6, d = 7, x = 9;

TokenSeq random_seq(Rng& rng, std::size_t lo, std::size_t hi, Token first, std::size_t n) {
  TokenSeq s(lo + uniform_index(rng, hi - lo + 1));
  for (Token& t : s) t = first + static_cast<Token>(uniform_index(rng, n));
  return s;
}

bool is_tier(double v) {
  return std::find(kStepTiers.begin(), kStepTiers.end(), v) != kStepTiers.end();
}

}  // namespace

TEST_CASE("n-gram table counts") {
  const TokenSeq s{a, b, a, b, a};
  NGramTable t(s);
  CHECK(t.count(TokenSeq{a, b}) == 2);
  CHECK(t.count(TokenSeq{a}) == 3);
  CHECK(t.count(TokenSeq{a, b, a, b}) == 1);
  CHECK(t.count(TokenSeq{c}) == 0);
  for (std::size_t n = 1; n <= 4; ++n) {
    std::size_t sum = 0;
    for (const auto& [g, k] : t.order(n)) {
      CHECK(k > 0);
      sum += k;
    }
    CHECK(sum == t.total(n));
    CHECK(t.total(n) == 5 - n + 1);
  }
  CHECK(NGramTable(TokenSeq{a, b}).total(3) == 0);
}

TEST_CASE("clipped precision") {
  const TokenSeq ref{a, b, c, d}, y{a, b, d, c};
  CHECK(ngram_precision(y, ref, 1) == 1.0);
  CHECK(ngram_precision(y, ref, 2) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(ngram_precision(y, ref, 3) == 0.0);
  CHECK(ngram_precision(y, ref, 4) == 0.0);
  for (std::size_t n = 1; n <= 4; ++n) CHECK(ngram_precision(ref, ref, n) == 1.0);
  CHECK(ngram_precision(TokenSeq{x, x}, ref, 1) == 0.0);
  CHECK(ngram_precision(TokenSeq{a, b}, ref, 3) == 0.0);
  // Clipping: repeated tokens only match as often as the reference has them.
  CHECK(ngram_precision(TokenSeq{a, a, a, a}, TokenSeq{a, b}, 1) == 0.25);
  CHECK_THROWS(ngram_precision(y, ref, 5));
}

TEST_CASE("similarity score") {
  const TokenSeq ref{a, b, c, d};
  CHECK(similarity_score(ref, ref) == 1.0);
  CHECK(similarity_score(TokenSeq{x, x, x}, ref) == 0.0);
  CHECK(std::abs(similarity_score(TokenSeq{a, b, d, c}, ref) - (0.2 / 3 + 0.1)) < 1e-15);

  // Independently computed with a brute-force counter.
  CHECK(std::abs(similarity_score(TokenSeq{5, 4, 4, 7, 7, 4, 5, 4, 7}, TokenSeq{5, 7, 4, 4, 4, 6, 4}) -
                 0.11666666666666667) < 1e-15);
  CHECK(std::abs(similarity_score(TokenSeq{4, 5, 6, 7, 5, 4}, TokenSeq{4, 5, 4, 7, 4}) -
                 0.14666666666666667) < 1e-15);
  CHECK(std::abs(similarity_score(TokenSeq{7, 6, 7, 7, 6, 6, 5, 5},
                                  TokenSeq{6, 5, 4, 5, 6, 4, 4, 4, 5}) -
                 0.07857142857142857) < 1e-15);
}

TEST_CASE("similarity score properties") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    auto ref = random_seq(rng, 1, 10, 4, 4);
    auto y = random_seq(rng, 1, 10, 4, 4);
    const double s = similarity_score(y, ref);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    bool all_one = true;
    for (std::size_t n = 1; n <= 4; ++n) all_one = all_one && ngram_precision(y, ref, n) == 1.0;
    CHECK((s == 1.0) == all_one);
    // Consistent relabeling (a permutation of the alphabet) leaves S unchanged.
    auto relabel = [](TokenSeq v) {
      for (Token& t : v) t = 4 + (t - 4 + 3) % 4 + 10;
      return v;
    };
    CHECK(similarity_score(relabel(y), relabel(ref)) == s);
  }
}

TEST_CASE("step rewards: worked examples") {
  CHECK(stepwise_rewards(TokenSeq{a, a}, TokenSeq{a, b})[1] == 0.0);
  const auto r = stepwise_rewards(TokenSeq{a, b, x}, TokenSeq{a, b, c, d});
  CHECK(r[0] == 0.1);
  CHECK(r[1] == 0.3);  // only the bigram tier is reachable and it holds
  CHECK(r[2] == 0.0);
  const TokenSeq ref{a, b, c, d, a, c};
  const auto self = stepwise_rewards(ref, ref);
  for (std::size_t t = 3; t < self.size(); ++t) CHECK(self[t] == 1.0);
  CHECK(self[0] == 0.1);
  CHECK(self[1] == 0.3);
  CHECK(self[2] == 0.6);
  CHECK(stepwise_reward(TokenSeq{a, b, x}, TokenSeq{a, b, c, d}) == 0.0);
  CHECK_THROWS(stepwise_reward(TokenSeq{}, ref));

  // Independently computed with a brute-force counter.
  CHECK(stepwise_rewards(TokenSeq{5, 4, 4, 7, 7, 4, 5, 4, 7}, TokenSeq{5, 7, 4, 4, 4, 6, 4}) ==
        std::vector<double>{0.1, 0.1, 0.3, 0.1, 0.0, 0.3, 0.0, 0.1, 0.0});
  CHECK(stepwise_rewards(TokenSeq{4, 5, 6, 7, 5, 4}, TokenSeq{4, 5, 4, 7, 4}) ==
        std::vector<double>{0.1, 0.3, 0.0, 0.1, 0.0, 0.3});
  CHECK(stepwise_rewards(TokenSeq{4, 4, 7, 5, 6, 5, 7, 7, 4}, TokenSeq{4, 6, 7, 6, 7, 6}) ==
        std::vector<double>{0.1, 0.0, 0.1, 0.0, 0.1, 0.0, 0.1, 0.0, 0.0});
}

TEST_CASE("step reward properties") {
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    auto ref = random_seq(rng, 1, 12, 4, 3);
    auto y = random_seq(rng, 1, 12, 4, 4);
    const auto r = stepwise_rewards(y, ref);
    REQUIRE(r.size() == y.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
      CHECK(is_tier(r[t]));
      // History monotone: the prefix alone assigns the same reward.
      CHECK(stepwise_reward(std::span<const Token>(y).first(t + 1), ref) == r[t]);
    }
    // A prefix of the reference earns the top reachable tier at every step.
    const std::size_t k = 1 + uniform_index(rng, ref.size());
    const auto pr = stepwise_rewards(std::span<const Token>(ref).first(k), ref);
    for (std::size_t t = 0; t < pr.size(); ++t)
      CHECK(pr[t] == kStepTiers[kMaxOrder - std::min<std::size_t>(t + 1, kMaxOrder)]);
  }
}

TEST_CASE("step gradient coefficients") {
  const TokenSeq ref{a, b, c, d, b};
  const auto c1 = step_gradient_coeffs(ref, ref, 1.0);
  for (std::size_t t = 3; t < c1.size(); ++t) CHECK(c1[t] == -1.0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    auto y = random_seq(rng, 1, 8, 4, 4);
    const double tau = uniform(rng, 0.1, 2.0);
    const auto r = stepwise_rewards(y, ref);
    const auto k = step_gradient_coeffs(y, ref, tau);
    const auto k2 = step_gradient_coeffs(y, ref, 2 * tau);
    for (std::size_t t = 0; t < y.size(); ++t) {
      CHECK(k[t] == -r[t] / tau);
      CHECK(std::abs(k2[t] - k[t] / 2) < 1e-15);
    }
  }
  CHECK_THROWS_AS(step_gradient_coeffs(ref, ref, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(step_gradient_coeffs(ref, ref, -1.0), std::invalid_argument);
}
