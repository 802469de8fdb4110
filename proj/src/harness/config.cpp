// SPDX-License-Identifier: Apache-2.0
#include "gbn/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace gbn {

namespace {

using Cfg = ExperimentConfig;

struct Field {
  const char* name;
  std::function<std::string(const Cfg&)> get;
  std::function<void(Cfg&, const std::string&)> set;
};

[[noreturn]] void bad(const std::string& key, const std::string& v, const char* what) {
  throw std::invalid_argument("config: " + key + " = '" + v + "' is not " + what);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an integer in range");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v.empty()) bad(key, v, "a number");
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE) bad(key, v, "a number");
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "a boolean");
}

std::string fmt_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

#define GBN_SIZE(f)                                                        \
  Field{#f, [](const Cfg& c) { return std::to_string(c.f); },              \
        [](Cfg& c, const std::string& v) { c.f = parse_int<std::size_t>(#f, v); }}
#define GBN_U64(f)                                                         \
  Field{#f, [](const Cfg& c) { return std::to_string(c.f); },              \
        [](Cfg& c, const std::string& v) { c.f = parse_int<std::uint64_t>(#f, v); }}
#define GBN_INT(f)                                                         \
  Field{#f, [](const Cfg& c) { return std::to_string(c.f); },              \
        [](Cfg& c, const std::string& v) { c.f = parse_int<int>(#f, v); }}
#define GBN_DOUBLE(f)                                                      \
  Field{#f, [](const Cfg& c) { return fmt_double(c.f); },                  \
        [](Cfg& c, const std::string& v) { c.f = parse_double(#f, v); }}
#define GBN_BOOL(f)                                                        \
  Field{#f, [](const Cfg& c) { return std::string(c.f ? "true" : "false"); }, \
        [](Cfg& c, const std::string& v) { c.f = parse_bool(#f, v); }}
#define GBN_STR(f)                                                         \
  Field{#f, [](const Cfg& c) { return c.f; }, [](Cfg& c, const std::string& v) { c.f = v; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      GBN_STR(task),           GBN_STR(data_dir),        GBN_SIZE(synth_vocab),
      GBN_SIZE(synth_min_len), GBN_SIZE(synth_max_len),  GBN_SIZE(train_pairs),
      GBN_SIZE(dev_pairs),     GBN_SIZE(test_pairs),     GBN_DOUBLE(noise),
      GBN_U64(data_seed),      GBN_SIZE(min_count),      GBN_SIZE(max_len),
      GBN_SIZE(embed_dim),     GBN_SIZE(hidden_dim),     GBN_BOOL(bidirectional),
      GBN_STR(bridge),         GBN_DOUBLE(tau),          GBN_INT(m_max),
      GBN_SIZE(K),             GBN_DOUBLE(rho),          GBN_DOUBLE(epsilon),
      GBN_SIZE(epochs),        GBN_SIZE(batch_size),     GBN_SIZE(eval_every),
      GBN_SIZE(patience),      GBN_SIZE(beam),           GBN_SIZE(eval_beam),
      GBN_U64(seed),           GBN_STR(output_dir),      GBN_SIZE(stop_after_steps),
      GBN_BOOL(resume),        GBN_STR(init_checkpoint), GBN_STR(lm_checkpoint),   GBN_SIZE(lm_epochs),
      GBN_SIZE(pretrain_epochs), GBN_SIZE(bridge_pretrain_epochs), GBN_STR(reward_mode),
      GBN_BOOL(baseline),      GBN_SIZE(reinforce_samples), GBN_SIZE(kl_samples),
  };
  return f;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.name) return f;
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, value);
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
  return field(key).get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.name);
  return out;
}

std::string config_to_string(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + " = " + f.get(cfg) + "\n";
  return out;
}

ExperimentConfig config_from_string(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_string(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << config_to_string(cfg);
}

void validate(const ExperimentConfig& c) {
  auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + key + " " + what);
  };
  need(c.task == "copy" || c.task == "reverse" || c.task == "cipher+localswap" || c.task == "cipher",
       "task", "must be copy, reverse or cipher+localswap");
  need(c.synth_vocab >= 2, "synth_vocab", "must be at least 2");
  need(c.synth_min_len >= 1 && c.synth_min_len <= c.synth_max_len, "synth_min_len",
       "must be in 1..synth_max_len");
  need(c.train_pairs >= 1, "train_pairs", "must be positive");
  need(c.dev_pairs >= 1, "dev_pairs", "must be positive");
  need(c.noise >= 0.0 && c.noise <= 1.0, "noise", "must be in [0, 1]");
  need(c.max_len >= 1, "max_len", "must be positive");
  need(c.embed_dim >= 1 && c.hidden_dim >= 1, "embed_dim/hidden_dim", "must be positive");
  need(c.bridge == "mle" || c.bridge == "delta" || c.bridge == "uniform" || c.bridge == "lm" ||
           c.bridge == "coaching",
       "bridge", "must be mle, delta, uniform, lm or coaching");
  need(c.tau > 0.0, "tau", "must be positive");
  need(c.m_max >= -1, "m_max", "must be -1 (automatic) or nonnegative");
  need(c.K >= 1, "K", "must be at least 1");
  need(c.rho > 0.0 && c.rho < 1.0, "rho", "must be in (0, 1)");
  need(c.epsilon > 0.0, "epsilon", "must be positive");
  need(c.batch_size >= 1, "batch_size", "must be positive");
  need(c.patience >= 1, "patience", "must be positive");
  need(c.beam >= 1 && c.eval_beam >= 1, "beam/eval_beam", "must be positive");
  need(c.reward_mode == "step" || c.reward_mode == "sequence", "reward_mode", "must be step or sequence");
  need(c.reinforce_samples >= 1 && c.kl_samples >= 1, "reinforce_samples/kl_samples",
       "must be positive");
  namespace fs = std::filesystem;
  need(c.data_dir.empty() || fs::is_directory(c.data_dir), "data_dir", "does not exist");
  need(c.init_checkpoint.empty() || fs::exists(c.init_checkpoint), "init_checkpoint", "does not exist");
  need(c.lm_checkpoint.empty() || fs::exists(c.lm_checkpoint), "lm_checkpoint", "does not exist");
}

}  // namespace gbn
