// SPDX-License-Identifier: Apache-2.0
#include "gbn/generator_training.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gbn/log.hpp"

namespace gbn {

std::vector<WeightedTarget> dedupe_samples(std::span<const TokenSeq> samples) {
  if (samples.empty()) throw std::invalid_argument("dedupe_samples: no samples");
  std::vector<WeightedTarget> out;
  std::vector<std::size_t> counts;
  for (const TokenSeq& s : samples) {
    std::size_t i = 0;
    while (i < out.size() && out[i].tokens != s) ++i;
    if (i == out.size()) {
      out.push_back({s, 0.0});
      counts.push_back(0);
    }
    ++counts[i];
  }
  const double k = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = static_cast<double>(counts[i]) / k;
  return out;
}

double accumulate_gradients(Seq2Seq& model, std::span<const TrainItem> batch) {
  if (batch.empty()) throw std::invalid_argument("training step: empty batch");
  model.params().zero_grad();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const TrainItem& item : batch) {
    if (item.targets.empty()) throw std::invalid_argument("training step: item without targets");
    Tape tape;
    Seq2SeqGraph g(model, tape);
    auto enc = g.encode(item.source);
    std::vector<Var> terms;
    for (const WeightedTarget& t : item.targets)
      terms.push_back((-t.weight * inv_b) * g.sequence_logprob(enc, t.tokens));
    Var item_loss = tape.add_n(terms);
    loss += item_loss.value().item();
    tape.backward(item_loss);
  }
  return loss;
}

StepResult weighted_step(Seq2Seq& model, Adadelta& opt, std::span<const TrainItem> batch) {
  StepResult r;
  r.loss = accumulate_gradients(model, batch);
  if (!std::isfinite(r.loss)) {
    log_warn("skipping update: non-finite loss " + std::to_string(r.loss));
    return r;
  }
  r.applied = opt.step();
  return r;
}

StepResult mle_step(Seq2Seq& model, Adadelta& opt, std::span<const Pair> batch) {
  std::vector<BridgeBatchItem> items;
  items.reserve(batch.size());
  for (const Pair& p : batch) items.push_back({p.source, {p.target}});
  return gbn_step(model, opt, items);
}

StepResult gbn_step(Seq2Seq& model, Adadelta& opt, std::span<const BridgeBatchItem> batch) {
  std::vector<TrainItem> items;
  items.reserve(batch.size());
  for (const BridgeBatchItem& b : batch) {
    if (b.samples.empty()) throw std::invalid_argument("gbn_step: item without samples");
    items.push_back({b.source, dedupe_samples(b.samples)});
  }
  return weighted_step(model, opt, items);
}

}  // namespace gbn
