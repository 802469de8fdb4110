// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "gbn/adadelta.hpp"
#include "gbn/seq2seq.hpp"

namespace gbn {

struct WeightedTarget {
  TokenSeq tokens;
  double weight = 1.0;
};

// One source with the targets it is trained towards. Weights of one item
// normally sum to 1.
struct TrainItem {
  TokenSeq source;
  std::vector<WeightedTarget> targets;
};

// Collapses repeated samples into distinct targets weighted by
// multiplicity / K, in order of first appearance.
std::vector<WeightedTarget> dedupe_samples(std::span<const TokenSeq> samples);

struct StepResult {
  double loss = 0.0;
  bool applied = false;
};

// Zeroes the gradients, then accumulates the gradient of
//   loss = -(1/B) sum_b sum_k w_bk log p(Y_bk | X_b)
// into model.params(). Returns the loss.
double accumulate_gradients(Seq2Seq& model, std::span<const TrainItem> batch);

// Weighted-target update shared by both training modes. A non-finite loss or
// gradient skips the optimizer update and logs a warning.
StepResult weighted_step(Seq2Seq& model, Adadelta& opt, std::span<const TrainItem> batch);

struct Pair {
  TokenSeq source;
  TokenSeq target;
};

// loss = -mean log p(Y* | X), one optimizer update.
StepResult mle_step(Seq2Seq& model, Adadelta& opt, std::span<const Pair> batch);

struct BridgeBatchItem {
  TokenSeq source;
  std::vector<TokenSeq> samples;  // K >= 1 bridge samples
};

// loss = -(1/B) sum_b (1/K) sum_k log p(Y^k | X_b); repeated samples are
// deduplicated, so K copies of Y* reproduce mle_step exactly.
StepResult gbn_step(Seq2Seq& model, Adadelta& opt, std::span<const BridgeBatchItem> batch);

}  // namespace gbn
