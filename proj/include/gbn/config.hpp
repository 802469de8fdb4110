// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gbn {

// Everything a run depends on. Stored as flat `key = value` lines; `#` starts
// a comment.
struct ExperimentConfig {
  // data
  std::string task = "cipher+localswap";
  std::string data_dir;  // when set: {train,dev,test}.{src,tgt} are read from it
  std::size_t synth_vocab = 50;
  std::size_t synth_min_len = 6;
  std::size_t synth_max_len = 12;
  std::size_t train_pairs = 2000;
  std::size_t dev_pairs = 200;
  std::size_t test_pairs = 200;
  double noise = 0.15;
  std::uint64_t data_seed = 1;
  std::size_t min_count = 1;
  std::size_t max_len = 50;  // words per sentence; decoding allows max_len + 1 tokens with EOS

  // model
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  bool bidirectional = false;

  // bridge: mle | delta | uniform | lm | coaching
  std::string bridge = "mle";
  double tau = 0.8;
  int m_max = -1;
  std::size_t K = 5;

  // optimizer and schedule
  double rho = 0.95;
  double epsilon = 1e-6;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t eval_every = 0;  // batches between dev evaluations; 0 = once per epoch
  std::size_t patience = 5;
  std::size_t beam = 8;       // test decoding
  std::size_t eval_beam = 1;  // dev decoding during training
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  std::size_t stop_after_steps = 0;  // stop (with a checkpoint) after this many logged steps
  bool resume = false;

  // generator parameters (gen.*) loaded before training when set
  std::string init_checkpoint;

  // language model
  std::string lm_checkpoint;
  std::size_t lm_epochs = 5;

  // coaching
  std::size_t pretrain_epochs = 20;  // with early stopping on dev BLEU
  std::size_t bridge_pretrain_epochs = 20;
  std::string reward_mode = "step";  // step | sequence
  bool baseline = false;
  std::size_t reinforce_samples = 1;
  std::size_t kl_samples = 1;
};

// Throws std::invalid_argument on an unknown key or malformed value.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

std::string config_to_string(const ExperimentConfig& cfg);
ExperimentConfig config_from_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Range checks; throws std::invalid_argument with the offending key.
void validate(const ExperimentConfig& cfg);

}  // namespace gbn
