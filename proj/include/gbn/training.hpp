// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gbn/config.hpp"
#include "gbn/generator_training.hpp"
#include "gbn/language_model.hpp"
#include "gbn/seq2seq.hpp"
#include "gbn/synth.hpp"
#include "gbn/vocab.hpp"

namespace gbn {

struct Dataset {
  Vocab src_vocab, tgt_vocab;
  std::vector<Pair> train, dev, test;  // sources without EOS, targets with EOS
  std::vector<Sentence> dev_refs, test_refs;
};

// Synthetic task from the config, or {train,dev,test}.{src,tgt} under
// data_dir. Vocabularies come from the training side only.
Dataset load_dataset(const ExperimentConfig& cfg);
ParallelCorpus synth_corpus(const ExperimentConfig& cfg, const std::string& split);

Seq2SeqConfig generator_config(const ExperimentConfig& cfg, const Dataset& data);
Seq2SeqConfig bridge_net_config(const ExperimentConfig& cfg, const Dataset& data);
LmConfig lm_config(const ExperimentConfig& cfg, const Dataset& data);

std::vector<Sentence> decode_corpus(const Seq2Seq& model, const std::vector<Pair>& pairs,
                                    const Vocab& tgt_vocab, std::size_t beam);
double bleu_of(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

struct RunSummary {
  std::string bridge;
  std::uint64_t seed = 0;
  bool completed = false;  // false when stopped by stop_after_steps
  std::size_t steps = 0;
  double best_dev_bleu = -1.0;
  double test_bleu = -1.0;  // -1 when not evaluated
  double seconds = 0.0;
  std::string output_dir;
  std::string metrics_path;
  std::string best_checkpoint;
};

// Writes metrics.csv, latest.ckpt, best.ckpt and test.hyp under
// cfg.output_dir. With cfg.resume, continues from latest.ckpt.
RunSummary train_static(const ExperimentConfig& cfg);
RunSummary train_coaching(const ExperimentConfig& cfg);
// Dispatches on cfg.bridge.
RunSummary train(const ExperimentConfig& cfg);

struct LmRunSummary {
  std::vector<LmEpochLog> epochs;
  std::string checkpoint;
  double seconds = 0.0;
};

LmRunSummary pretrain_lm(const ExperimentConfig& cfg, const std::string& checkpoint_path);
GruLM load_lm(const std::string& path);

// Generator parameters from a training checkpoint (best.ckpt or latest.ckpt).
Seq2Seq load_generator(const std::string& path, const ExperimentConfig& cfg, const Dataset& data);

}  // namespace gbn
