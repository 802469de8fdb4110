// SPDX-License-Identifier: Apache-2.0
#include "gbn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "gbn/bleu.hpp"
#include "gbn/bridges.hpp"
#include "gbn/checkpoint.hpp"
#include "gbn/corpus.hpp"
#include "gbn/log.hpp"
#include "gbn/metrics.hpp"
#include "gbn/reward.hpp"

namespace gbn {

namespace fs = std::filesystem;

ParallelCorpus synth_corpus(const ExperimentConfig& cfg, const std::string& split) {
  SynthSpec spec;
  spec.kind = parse_synth_kind(cfg.task);
  spec.vocab = cfg.synth_vocab;
  spec.min_len = cfg.synth_min_len;
  spec.max_len = cfg.synth_max_len;
  spec.noise = cfg.noise;
  spec.seed = cfg.data_seed;
  const std::size_t test = cfg.test_pairs;
  auto all = synth_task(spec, cfg.train_pairs + cfg.dev_pairs + test);
  auto parts = split_corpus(all, {cfg.train_pairs, cfg.dev_pairs, test});
  if (split == "train") return parts[0];
  if (split == "dev") return parts[1];
  if (split == "test") return parts[2];
  throw std::invalid_argument("unknown split '" + split + "'");
}

namespace {

std::vector<Pair> encode_pairs(const ParallelCorpus& c, const Vocab& sv, const Vocab& tv) {
  std::vector<Pair> out;
  out.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back({sv.encode(c.src[i]), with_eos(tv.encode(c.tgt[i]))});
  return out;
}

ParallelCorpus read_split(const ExperimentConfig& cfg, const std::string& split) {
  const fs::path dir(cfg.data_dir);
  const auto src = (dir / (split + ".src")).string(), tgt = (dir / (split + ".tgt")).string();
  if (!fs::exists(src) || !fs::exists(tgt))
    throw std::runtime_error("data_dir: missing " + src + " or " + tgt);
  return read_parallel(src, tgt, cfg.max_len);
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& cfg) {
  validate(cfg);
  ParallelCorpus train, dev, test;
  if (cfg.data_dir.empty()) {
    train = synth_corpus(cfg, "train");
    dev = synth_corpus(cfg, "dev");
    if (cfg.test_pairs) test = synth_corpus(cfg, "test");
    // Same length filter as file corpora.
    auto filter = [&](ParallelCorpus& c) {
      ParallelCorpus k;
      for (std::size_t i = 0; i < c.size(); ++i)
        if (c.src[i].size() <= cfg.max_len && c.tgt[i].size() <= cfg.max_len) {
          k.src.push_back(c.src[i]);
          k.tgt.push_back(c.tgt[i]);
        }
      c = std::move(k);
    };
    filter(train);
    filter(dev);
    filter(test);
  } else {
    train = read_split(cfg, "train");
    dev = read_split(cfg, "dev");
    if (fs::exists(fs::path(cfg.data_dir) / "test.src")) test = read_split(cfg, "test");
  }
  if (train.size() == 0) throw std::runtime_error("dataset: no training pairs");
  if (dev.size() == 0) throw std::runtime_error("dataset: no dev pairs");
  Dataset d;
  d.src_vocab = build_vocab(train.src, cfg.min_count);
  d.tgt_vocab = build_vocab(train.tgt, cfg.min_count);
  d.train = encode_pairs(train, d.src_vocab, d.tgt_vocab);
  d.dev = encode_pairs(dev, d.src_vocab, d.tgt_vocab);
  d.test = encode_pairs(test, d.src_vocab, d.tgt_vocab);
  d.dev_refs = dev.tgt;
  d.test_refs = test.tgt;
  return d;
}

Seq2SeqConfig generator_config(const ExperimentConfig& cfg, const Dataset& data) {
  Seq2SeqConfig c;
  c.source_vocab = data.src_vocab.size();
  c.target_vocab = data.tgt_vocab.size();
  c.embed_dim = cfg.embed_dim;
  c.hidden_dim = cfg.hidden_dim;
  c.bidirectional = cfg.bidirectional;
  c.constraints.max_len = cfg.max_len + 1;
  return c;
}

Seq2SeqConfig bridge_net_config(const ExperimentConfig& cfg, const Dataset& data) {
  Seq2SeqConfig c = generator_config(cfg, data);
  c.source_vocab = data.tgt_vocab.size();
  return c;
}

LmConfig lm_config(const ExperimentConfig& cfg, const Dataset& data) {
  LmConfig c;
  c.vocab = data.tgt_vocab.size();
  c.embed_dim = cfg.embed_dim;
  c.hidden_dim = cfg.hidden_dim;
  return c;
}

std::vector<Sentence> decode_corpus(const Seq2Seq& model, const std::vector<Pair>& pairs,
                                    const Vocab& tgt_vocab, std::size_t beam) {
  std::vector<Sentence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(tgt_vocab.decode(model.beam_search(p.source, beam).tokens));
  return out;
}

double bleu_of(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  return corpus_bleu(hyps, refs);
}

namespace {

enum class PhaseKind { static_main, gen_pretrain, bridge_pretrain, coach };

struct Phase {
  PhaseKind kind;
  std::size_t epochs;
  bool early_stop;
  bool evaluate;
};

Tensor index_tensor(const std::vector<std::size_t>& v) {
  std::vector<double> d(v.begin(), v.end());
  return Tensor::vector(d);
}

std::vector<std::size_t> tensor_indices(const Tensor& t) {
  std::vector<std::size_t> out;
  for (double v : t.data()) out.push_back(static_cast<std::size_t>(v));
  return out;
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, bool coaching)
      : cfg_(cfg), coaching_(coaching), data_(load_dataset(cfg)) {
    Rng init(cfg.seed);
    gen_.emplace(generator_config(cfg, data_), init);
    if (!cfg.init_checkpoint.empty()) load_params(Checkpoint::load(cfg.init_checkpoint), gen_->params(), "gen.");
    gen_opt_.emplace(gen_->params(), AdadeltaOptions{cfg.rho, cfg.epsilon});
    if (coaching_) {
      Rng binit(cfg.seed * 2654435761ULL + 97);
      bridge_.emplace(bridge_net_config(cfg, data_), binit);
      bridge_opt_.emplace(bridge_->params(), AdadeltaOptions{cfg.rho, cfg.epsilon});
      phases_ = {{PhaseKind::gen_pretrain, cfg.pretrain_epochs, true, true},
                 {PhaseKind::bridge_pretrain, cfg.bridge_pretrain_epochs, false, false},
                 {PhaseKind::coach, cfg.epochs, true, true}};
    } else {
      phases_ = {{PhaseKind::static_main, cfg.epochs, true, true}};
    }
    order_rng_.seed(cfg.seed + 1);
    sample_rng_.seed(cfg.seed + 2);
    bcfg_.tau = cfg.tau;
    bcfg_.m_max = cfg.m_max;
    bcfg_.K = cfg.K;
    if (!coaching_ && cfg.bridge != "mle") bcfg_.kind = parse_bridge_kind(cfg.bridge);
    if (!coaching_ && cfg.bridge == "lm") {
      if (cfg.lm_checkpoint.empty() || !fs::exists(cfg.lm_checkpoint))
        throw std::runtime_error("bridge=lm needs lm_checkpoint pointing at a pretrained LM (run pretrain-lm)");
      lm_.emplace(load_lm(cfg.lm_checkpoint));
      if (lm_->vocab_size() != data_.tgt_vocab.size())
        throw std::runtime_error("lm checkpoint vocabulary does not match the target vocabulary");
    }
    copts_.tau = cfg.tau;
    copts_.reward = cfg.reward_mode == "sequence" ? RewardMode::sequence : RewardMode::step;
    copts_.baseline = cfg.baseline;
    copts_.reinforce_samples = cfg.reinforce_samples;
    copts_.kl_samples = cfg.kl_samples;

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    metrics_path_ = (dir / "metrics.csv").string();
    latest_path_ = (dir / "latest.ckpt").string();
    best_path_ = (dir / "best.ckpt").string();
    std::size_t keep = 0;
    if (cfg.resume && fs::exists(latest_path_)) {
      keep = load_state(Checkpoint::load(latest_path_));
      log_info("resuming from " + latest_path_ + " at step " + std::to_string(step_));
    } else if (cfg.resume) {
      log_warn("resume requested but " + latest_path_ + " does not exist; starting fresh");
    }
    metrics_.emplace(metrics_path_, cfg.resume && keep > 0, keep);
    save_config(cfg, (dir / "config.txt").string());
  }

  RunSummary run() {
    const auto t0 = std::chrono::steady_clock::now();
    RunSummary s;
    s.bridge = cfg_.bridge;
    s.seed = cfg_.seed;
    s.output_dir = cfg_.output_dir;
    s.metrics_path = metrics_path_;
    s.best_checkpoint = best_path_;
    s.completed = loop();
    s.steps = step_;
    s.best_dev_bleu = best_dev_;
    if (s.completed && !data_.test.empty() && fs::exists(best_path_)) {
      Seq2Seq best = load_generator(best_path_, cfg_, data_);
      auto hyps = decode_corpus(best, data_.test, data_.tgt_vocab, cfg_.beam);
      write_sentences((fs::path(cfg_.output_dir) / "test.hyp").string(), hyps);
      s.test_bleu = bleu_of(hyps, data_.test_refs);
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  }

 private:
  // Returns false when interrupted by stop_after_steps.
  bool loop() {
    const std::size_t n = data_.train.size();
    const std::size_t B = cfg_.batch_size;
    if (step_ == 0 && !cfg_.init_checkpoint.empty()) {
      Phase first = phases_[phase_];
      first.early_stop = false;
      eval(first);
      save_state();
    }
    while (phase_ < phases_.size()) {
      const Phase& ph = phases_[phase_];
      if (ph.kind == PhaseKind::bridge_pretrain && bridge_targets_.empty()) build_bridge_targets();
      while (epoch_ < ph.epochs && !phase_done_) {
        if (cursor_ == 0 && order_.empty()) {
          order_.resize(n);
          std::iota(order_.begin(), order_.end(), std::size_t{0});
          for (std::size_t i = n; i > 1; --i) std::swap(order_[i - 1], order_[uniform_index(order_rng_, i)]);
        }
        while (cursor_ < n) {
          const std::size_t end = std::min(n, cursor_ + B);
          std::vector<std::size_t> idx(order_.begin() + cursor_, order_.begin() + end);
          run_batch(ph, idx);
          cursor_ = end;
          ++batches_since_eval_;
          if (ph.evaluate && cfg_.eval_every && batches_since_eval_ >= cfg_.eval_every) eval(ph);
          if (phase_done_) break;
          if (cfg_.stop_after_steps && step_ >= cfg_.stop_after_steps) {
            save_state();
            return false;
          }
        }
        if (!phase_done_) {
          ++epoch_;
          if (ph.evaluate && !cfg_.eval_every) eval(ph);
        }
        cursor_ = 0;
        order_.clear();
        save_state();
      }
      // The pre-trained generator is the best one seen on dev.
      if (ph.kind == PhaseKind::gen_pretrain && fs::exists(best_path_))
        load_params(Checkpoint::load(best_path_), gen_->params(), "gen.");
      ++phase_;
      epoch_ = 0;
      cursor_ = 0;
      order_.clear();
      phase_done_ = false;
      evals_since_best_ = 0;
      batches_since_eval_ = 0;
      save_state();
    }
    return true;
  }

  void log_row(MetricRow r) {
    r.step = ++step_;
    metrics_->write(r);
  }

  void check_finite(double loss, const char* what) {
    if (std::isfinite(loss)) {
      nonfinite_ = 0;
      return;
    }
    if (++nonfinite_ >= 2)
      throw std::runtime_error(std::string("training diverged: non-finite ") + what +
                               " loss on two consecutive steps at step " + std::to_string(step_));
  }

  std::size_t display_epoch() const { return epoch_ + 1; }

  void run_batch(const Phase& ph, const std::vector<std::size_t>& idx) {
    switch (ph.kind) {
      case PhaseKind::static_main:
        if (cfg_.bridge == "mle") {
          generator_mle(idx, "generator-step");
        } else {
          generator_bridge(idx);
        }
        break;
      case PhaseKind::gen_pretrain:
        generator_mle(idx, "pretrain");
        break;
      case PhaseKind::bridge_pretrain: {
        std::vector<Pair> batch;
        for (std::size_t i : idx) {
          const auto y = content(data_.train[i].target);
          batch.push_back({TokenSeq(y.begin(), y.end()), bridge_targets_[i]});
        }
        const double r = reward_of_pairs(idx, batch);
        auto res = mle_step(*bridge_, *bridge_opt_, batch);
        check_finite(res.loss, "bridge pretrain");
        log_row({0, display_epoch(), "pretrain", res.loss, r, NAN});
        break;
      }
      case PhaseKind::coach: {
        std::vector<CoachingItem> items;
        for (std::size_t i : idx) items.push_back({data_.train[i].source, data_.train[i].target});
        auto cl = coaching_update(items, *bridge_, *gen_, copts_, *bridge_opt_, sample_rng_, &cstate_);
        check_finite(cl.reinforce + cl.kl, "bridge-step");
        log_row({0, display_epoch(), "bridge-step", cl.reinforce + cl.kl, cl.mean_reward, NAN});

        std::vector<BridgeBatchItem> gb;
        double rsum = 0.0;
        std::size_t rn = 0;
        for (std::size_t i : idx) {
          BridgeBatchItem b{data_.train[i].source, {}};
          for (std::size_t k = 0; k < cfg_.K; ++k) {
            auto s = coaching_sample(data_.train[i].target, *bridge_, sample_rng_);
            rsum += similarity_score(content(s.tokens), content(data_.train[i].target));
            ++rn;
            b.samples.push_back(std::move(s.tokens));
          }
          gb.push_back(std::move(b));
        }
        auto res = gbn_step(*gen_, *gen_opt_, gb);
        check_finite(res.loss, "generator-step");
        log_row({0, display_epoch(), "generator-step", res.loss, rsum / static_cast<double>(rn), NAN});
        break;
      }
    }
  }

  // Mean similarity of targets to their references, weighted like the loss.
  double reward_of_pairs(const std::vector<std::size_t>& idx, const std::vector<Pair>& batch) {
    double r = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j)
      r += 1.0 * similarity_score(content(batch[j].target), content(data_.train[idx[j]].target));
    return r / static_cast<double>(idx.size());
  }

  void generator_mle(const std::vector<std::size_t>& idx, const char* phase) {
    std::vector<Pair> batch;
    for (std::size_t i : idx) batch.push_back(data_.train[i]);
    const double r = reward_of_pairs(idx, batch);
    auto res = mle_step(*gen_, *gen_opt_, batch);
    check_finite(res.loss, "generator");
    log_row({0, display_epoch(), phase, res.loss, r, NAN});
  }

  void generator_bridge(const std::vector<std::size_t>& idx) {
    BridgeNets nets;
    if (lm_) nets.lm = &*lm_;
    std::vector<BridgeBatchItem> batch;
    double r = 0.0;
    for (std::size_t i : idx) {
      const auto& y = data_.train[i].target;
      auto samples = draw_bridge_samples(y, bcfg_, nets, data_.tgt_vocab.size(), sample_rng_);
      for (const auto& w : dedupe_samples(samples))
        r += w.weight * similarity_score(content(w.tokens), content(y));
      batch.push_back({data_.train[i].source, std::move(samples)});
    }
    r /= static_cast<double>(idx.size());
    auto res = gbn_step(*gen_, *gen_opt_, batch);
    check_finite(res.loss, "generator");
    log_row({0, display_epoch(), "generator-step", res.loss, r, NAN});
  }

  void eval(const Phase& ph) {
    batches_since_eval_ = 0;
    auto hyps = decode_corpus(*gen_, data_.dev, data_.tgt_vocab, cfg_.eval_beam);
    const double bleu = bleu_of(hyps, data_.dev_refs);
    log_row({0, display_epoch(), "eval", NAN, NAN, bleu});
    log_info("step " + std::to_string(step_) + " dev BLEU " + std::to_string(bleu));
    if (bleu > best_dev_) {
      best_dev_ = bleu;
      evals_since_best_ = 0;
      Checkpoint c;
      save_params(c, gen_->params(), "gen.");
      c.save(best_path_);
    } else if (best_dev_ > 0.0) {
      // patience only runs once the model has produced some matching output
      ++evals_since_best_;
      if (ph.early_stop && evals_since_best_ >= cfg_.patience) phase_done_ = true;
    }
  }

  void build_bridge_targets() {
    bridge_targets_.clear();
    for (const auto& p : data_.train) bridge_targets_.push_back(gen_->beam_search(p.source, cfg_.beam).tokens);
  }

  void save_state() {
    Checkpoint c;
    save_params(c, gen_->params(), "gen.");
    gen_opt_->save(c, "gen_opt.");
    if (bridge_) {
      save_params(c, bridge_->params(), "bridge.");
      bridge_opt_->save(c, "bridge_opt.");
      if (!cstate_.baseline.empty()) {
        c.put("state.baseline", Tensor::vector(cstate_.baseline));
        std::vector<double> seen(cstate_.seen.begin(), cstate_.seen.end());
        c.put("state.baseline_seen", Tensor::vector(seen));
      }
    }
    c.put("state.counters", index_tensor({phase_, epoch_, cursor_, step_, metrics_->rows(),
                                          evals_since_best_, nonfinite_, batches_since_eval_,
                                          phase_done_ ? 1u : 0u}));
    c.put("state.best_dev", Tensor::scalar(best_dev_));
    if (!order_.empty()) c.put("state.order", index_tensor(order_));
    c.put_bytes("rng.order", rng_state(order_rng_));
    c.put_bytes("rng.sample", rng_state(sample_rng_));
    c.put_bytes("meta.config", config_to_string(cfg_));
    c.save(latest_path_);
  }

  std::size_t load_state(const Checkpoint& c) {
    load_params(c, gen_->params(), "gen.");
    gen_opt_->load(c, "gen_opt.");
    if (bridge_) {
      load_params(c, bridge_->params(), "bridge.");
      bridge_opt_->load(c, "bridge_opt.");
      if (c.contains("state.baseline")) {
        auto b = c.tensor("state.baseline").data();
        cstate_.baseline.assign(b.begin(), b.end());
        auto s = c.tensor("state.baseline_seen").data();
        cstate_.seen.assign(s.size(), false);
        for (std::size_t i = 0; i < s.size(); ++i) cstate_.seen[i] = s[i] != 0.0;
      }
    }
    const auto k = tensor_indices(c.tensor("state.counters"));
    if (k.size() != 9) throw std::runtime_error("checkpoint: bad state.counters");
    phase_ = k[0];
    epoch_ = k[1];
    cursor_ = k[2];
    step_ = k[3];
    evals_since_best_ = k[5];
    nonfinite_ = k[6];
    batches_since_eval_ = k[7];
    phase_done_ = k[8] != 0;
    best_dev_ = c.tensor("state.best_dev").item();
    order_.clear();
    if (c.contains("state.order")) order_ = tensor_indices(c.tensor("state.order"));
    set_rng_state(order_rng_, c.bytes("rng.order"));
    set_rng_state(sample_rng_, c.bytes("rng.sample"));
    return k[4];
  }

  ExperimentConfig cfg_;
  bool coaching_;
  Dataset data_;
  std::optional<Seq2Seq> gen_, bridge_;
  std::optional<Adadelta> gen_opt_, bridge_opt_;
  std::optional<GruLM> lm_;
  std::optional<MetricsWriter> metrics_;
  std::vector<Phase> phases_;
  BridgeConfig bcfg_;
  CoachingOptions copts_;
  CoachingState cstate_;
  Rng order_rng_, sample_rng_;
  std::vector<TokenSeq> bridge_targets_;
  std::string metrics_path_, latest_path_, best_path_;

  std::size_t phase_ = 0, epoch_ = 0, cursor_ = 0, step_ = 0;
  std::size_t evals_since_best_ = 0, nonfinite_ = 0, batches_since_eval_ = 0;
  bool phase_done_ = false;
  double best_dev_ = -1.0;
  std::vector<std::size_t> order_;
};

}  // namespace

RunSummary train_static(const ExperimentConfig& cfg) {
  if (cfg.bridge == "coaching") throw std::invalid_argument("train_static: bridge=coaching needs train_coaching");
  return Runner(cfg, false).run();
}

RunSummary train_coaching(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.bridge = "coaching";
  return Runner(c, true).run();
}

RunSummary train(const ExperimentConfig& cfg) {
  return cfg.bridge == "coaching" ? train_coaching(cfg) : train_static(cfg);
}

LmRunSummary pretrain_lm(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = load_dataset(cfg);
  Rng init(cfg.seed + 3);
  GruLM lm(lm_config(cfg, data), init);
  Adadelta opt(lm.params(), AdadeltaOptions{cfg.rho, cfg.epsilon});
  std::vector<TokenSeq> train, dev;
  for (const auto& p : data.train) train.push_back(p.target);
  for (const auto& p : data.dev) dev.push_back(p.target);
  LmTrainOptions o;
  o.epochs = cfg.lm_epochs;
  o.batch_size = cfg.batch_size;
  o.shuffle_seed = cfg.seed + 4;
  LmRunSummary s;
  s.epochs = lm_train(lm, opt, train, dev, o);
  Checkpoint c;
  const auto& lc = lm.config();
  c.put("meta.lm_dims", Tensor::vector({static_cast<double>(lc.vocab), static_cast<double>(lc.embed_dim),
                                        static_cast<double>(lc.hidden_dim)}));
  save_params(c, lm.params(), "lm.");
  if (fs::path(checkpoint_path).has_parent_path()) fs::create_directories(fs::path(checkpoint_path).parent_path());
  c.save(checkpoint_path);
  s.checkpoint = checkpoint_path;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

GruLM load_lm(const std::string& path) {
  const Checkpoint c = Checkpoint::load(path);
  if (!c.contains("meta.lm_dims")) throw std::runtime_error(path + " is not a language-model checkpoint");
  const auto d = tensor_indices(c.tensor("meta.lm_dims"));
  if (d.size() != 3) throw std::runtime_error(path + ": bad meta.lm_dims");
  LmConfig lc;
  lc.vocab = d[0];
  lc.embed_dim = d[1];
  lc.hidden_dim = d[2];
  Rng unused(0);
  GruLM lm(lc, unused);
  load_params(c, lm.params(), "lm.");
  return lm;
}

Seq2Seq load_generator(const std::string& path, const ExperimentConfig& cfg, const Dataset& data) {
  const Checkpoint c = Checkpoint::load(path);
  Rng unused(0);
  Seq2Seq m(generator_config(cfg, data), unused);
  load_params(c, m.params(), "gen.");
  return m;
}

}  // namespace gbn
