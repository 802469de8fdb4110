// SPDX-License-Identifier: Apache-2.0
// gbn command-line driver.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gbn/bleu.hpp"
#include "gbn/bridges.hpp"
#include "gbn/checkpoint.hpp"
#include "gbn/config.hpp"
#include "gbn/corpus.hpp"
#include "gbn/log.hpp"
#include "gbn/oracle.hpp"
#include "gbn/reward.hpp"
#include "gbn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override one config key (key=value), repeatable");
  app->add_flag("-q,--quiet", c.quiet, "warnings only");
}

gbn::ExperimentConfig resolve(const Common& c) {
  gbn::ExperimentConfig cfg = c.config_path.empty() ? gbn::ExperimentConfig{} : gbn::load_config(c.config_path);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    gbn::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  gbn::set_log_level(c.quiet ? gbn::LogLevel::warn : gbn::LogLevel::info);
  return cfg;
}

void emit(const json& j, const std::string& file = {}) {
  std::cout << j.dump(2) << "\n";
  if (!file.empty()) {
    std::ofstream out(file);
    out << j.dump(2) << "\n";
  }
}

json summary_json(const gbn::RunSummary& s) {
  json j = {{"bridge", s.bridge},         {"seed", s.seed},
            {"completed", s.completed},   {"steps", s.steps},
            {"seconds", s.seconds},       {"output_dir", s.output_dir},
            {"metrics", s.metrics_path},  {"best_checkpoint", s.best_checkpoint}};
  j["best_dev_bleu"] = s.best_dev_bleu >= 0 ? json(s.best_dev_bleu) : json(nullptr);
  j["test_bleu"] = s.test_bleu >= 0 ? json(s.test_bleu) : json(nullptr);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative bridging network training and evaluation"};
  app.require_subcommand(1);

  Common prep_c;
  std::string prep_out;
  auto* prep = app.add_subcommand("prepare", "write the synthetic corpus as {train,dev,test}.{src,tgt}");
  add_common(prep, prep_c);
  prep->add_option("--out", prep_out, "output directory")->required();

  Common lm_c;
  std::string lm_out;
  auto* plm = app.add_subcommand("pretrain-lm", "train the target-side language model for the lm bridge");
  add_common(plm, lm_c);
  plm->add_option("--out", lm_out, "checkpoint path")->required();

  Common tr_c;
  std::string tr_bridge, tr_dir;
  std::optional<std::uint64_t> tr_seed;
  bool tr_resume = false;
  auto* tr = app.add_subcommand("train", "train a generator (mle, delta, uniform, lm or coaching bridge)");
  add_common(tr, tr_c);
  tr->add_option("--bridge", tr_bridge, "mle | delta | uniform | lm | coaching");
  tr->add_option("--seed", tr_seed, "run seed");
  tr->add_option("--output-dir", tr_dir, "run directory");
  tr->add_flag("--resume", tr_resume, "continue from <output-dir>/latest.ckpt");

  Common ev_c;
  std::string ev_hyp, ev_ref, ev_ckpt, ev_split = "test";
  std::size_t ev_beam = 0;
  auto* ev = app.add_subcommand("evaluate", "corpus BLEU of hypothesis files or of a checkpoint");
  add_common(ev, ev_c);
  ev->add_option("--hyp", ev_hyp, "hypothesis file")->check(CLI::ExistingFile);
  ev->add_option("--ref", ev_ref, "reference file")->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ev_ckpt, "generator checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--split", ev_split, "dev | test")->check(CLI::IsMember({"dev", "test"}));
  ev->add_option("--beam", ev_beam, "beam width (default: config beam)");

  Common sb_c;
  std::string sb_kind = "uniform", sb_lm, sb_ckpt;
  double sb_tau = 0.8;
  int sb_mmax = -1;
  std::size_t sb_n = 10, sb_k = 1;
  std::uint64_t sb_seed = 1;
  auto* sb = app.add_subcommand("sample-bridge", "print bridge samples for training targets as TSV");
  add_common(sb, sb_c);
  sb->add_option("--kind", sb_kind, "delta | uniform | lm | coaching")
      ->check(CLI::IsMember({"delta", "uniform", "lm", "coaching"}));
  sb->add_option("--tau", sb_tau, "temperature")->check(CLI::PositiveNumber);
  sb->add_option("--m-max", sb_mmax, "max edit distance (-1: ceil(len/4))");
  sb->add_option("--n", sb_n, "number of training targets");
  sb->add_option("--samples", sb_k, "samples per target");
  sb->add_option("--seed", sb_seed, "sampling seed");
  sb->add_option("--lm", sb_lm, "language-model checkpoint (kind=lm)")->check(CLI::ExistingFile);
  sb->add_option("--checkpoint", sb_ckpt, "coaching run checkpoint with bridge.* tensors (kind=coaching)")
      ->check(CLI::ExistingFile);

  std::uint64_t oc_seed = 1;
  auto* oc = app.add_subcommand("oracle-check", "exact-enumeration consistency checks");
  oc->add_option("--seed", oc_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      auto cfg = resolve(prep_c);
      fs::create_directories(prep_out);
      json files = json::array();
      for (const char* split : {"train", "dev", "test"}) {
        auto c = gbn::synth_corpus(cfg, split);
        const auto base = (fs::path(prep_out) / split).string();
        gbn::write_parallel(base + ".src", base + ".tgt", c);
        files.push_back({{"split", split}, {"pairs", c.size()}, {"src", base + ".src"}, {"tgt", base + ".tgt"}});
      }
      emit({{"command", "prepare"}, {"task", cfg.task}, {"files", files}});
    } else if (*plm) {
      auto cfg = resolve(lm_c);
      auto s = gbn::pretrain_lm(cfg, lm_out);
      json ep = json::array();
      for (const auto& e : s.epochs)
        ep.push_back({{"epoch", e.epoch}, {"train_ppl", e.train_perplexity}, {"heldout_ppl", e.heldout_perplexity}});
      emit({{"command", "pretrain-lm"}, {"checkpoint", s.checkpoint}, {"seconds", s.seconds}, {"epochs", ep}});
    } else if (*tr) {
      auto cfg = resolve(tr_c);
      if (!tr_bridge.empty()) cfg.bridge = tr_bridge;
      if (tr_seed) cfg.seed = *tr_seed;
      if (!tr_dir.empty()) cfg.output_dir = tr_dir;
      if (tr_resume) cfg.resume = true;
      gbn::validate(cfg);
      auto s = gbn::train(cfg);
      json j = summary_json(s);
      j["command"] = "train";
      emit(j, (fs::path(cfg.output_dir) / "summary.json").string());
      return s.completed || cfg.stop_after_steps ? 0 : 1;
    } else if (*ev) {
      double bleu = 0.0;
      json j = {{"command", "evaluate"}};
      if (!ev_hyp.empty() || !ev_ref.empty()) {
        if (ev_hyp.empty() || ev_ref.empty()) throw std::invalid_argument("evaluate: --hyp and --ref go together");
        bleu = gbn::corpus_bleu(gbn::read_sentences(ev_hyp), gbn::read_sentences(ev_ref));
        j["hyp"] = ev_hyp;
        j["ref"] = ev_ref;
      } else if (!ev_ckpt.empty()) {
        auto cfg = resolve(ev_c);
        auto data = gbn::load_dataset(cfg);
        auto model = gbn::load_generator(ev_ckpt, cfg, data);
        const auto& pairs = ev_split == "dev" ? data.dev : data.test;
        const auto& refs = ev_split == "dev" ? data.dev_refs : data.test_refs;
        if (pairs.empty()) throw std::runtime_error("evaluate: split '" + ev_split + "' is empty");
        const std::size_t beam = ev_beam ? ev_beam : cfg.beam;
        bleu = gbn::bleu_of(gbn::decode_corpus(model, pairs, data.tgt_vocab, beam), refs);
        j["checkpoint"] = ev_ckpt;
        j["split"] = ev_split;
        j["beam"] = beam;
      } else {
        throw std::invalid_argument("evaluate: give --hyp/--ref or --checkpoint");
      }
      j["bleu"] = bleu;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", bleu);
      j["bleu_2dp"] = buf;
      emit(j);
    } else if (*sb) {
      auto cfg = resolve(sb_c);
      auto data = gbn::load_dataset(cfg);
      gbn::BridgeConfig bc;
      bc.kind = gbn::parse_bridge_kind(sb_kind);
      bc.tau = sb_tau;
      bc.m_max = sb_mmax;
      bc.K = 1;
      gbn::BridgeNets nets;
      std::optional<gbn::GruLM> lm;
      std::optional<gbn::Seq2Seq> coach;
      if (bc.kind == gbn::BridgeKind::lm) {
        if (sb_lm.empty()) throw std::invalid_argument("sample-bridge: kind=lm needs --lm");
        lm.emplace(gbn::load_lm(sb_lm));
        nets.lm = &*lm;
      } else if (bc.kind == gbn::BridgeKind::coaching) {
        if (sb_ckpt.empty()) throw std::invalid_argument("sample-bridge: kind=coaching needs --checkpoint");
        gbn::Rng unused(0);
        coach.emplace(gbn::bridge_net_config(cfg, data), unused);
        gbn::load_params(gbn::Checkpoint::load(sb_ckpt), coach->params(), "bridge.");
        nets.coaching = &*coach;
      }
      gbn::Rng rng(sb_seed);
      std::cout << "target\tsample\tm\tS\tlog_density\n";
      const std::size_t n = std::min(sb_n, data.train.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto& y = data.train[i].target;
        for (std::size_t k = 0; k < sb_k; ++k) {
          auto s = gbn::draw_bridge_samples(y, bc, nets, data.tgt_vocab.size(), rng).front();
          const auto yc = gbn::content(y), sc = gbn::content(s);
          std::size_t m = 0;
          for (std::size_t t = 0; t < std::max(yc.size(), sc.size()); ++t)
            m += t >= yc.size() || t >= sc.size() || yc[t] != sc[t];
          const double dens = bc.kind == gbn::BridgeKind::uniform
                                  ? gbn::stratified_uniform_prob(s, y, bc, data.tgt_vocab.size())
                                  : gbn::bridge_density(bc.kind, s, y, bc, nets);
          std::cout << gbn::join_words(data.tgt_vocab.decode(y)) << "\t"
                    << gbn::join_words(data.tgt_vocab.decode(s)) << "\t" << m << "\t"
                    << gbn::similarity_score(sc, yc) << "\t" << std::log(dens) << "\n";
        }
      }
    } else if (*oc) {
      auto checks = gbn::run_equivalence_suite(oc_seed);
      bool ok = true;
      json arr = json::array();
      for (const auto& c : checks) {
        ok = ok && c.passed;
        arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
      }
      emit({{"command", "oracle-check"}, {"passed", ok}, {"checks", arr}});
      return ok ? 0 : 1;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "gbn: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
