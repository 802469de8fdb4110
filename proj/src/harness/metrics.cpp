// SPDX-License-Identifier: Apache-2.0
#include "gbn/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace gbn {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double field(const std::string& s) { return s.empty() ? NAN : std::stod(s); }

}  // namespace

std::string format_row(const MetricRow& r) {
  return std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + r.phase + "," + num(r.loss) +
         "," + num(r.mean_reward) + "," + num(r.dev_bleu);
}

MetricRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      f.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  f.push_back(cur);
  if (f.size() != 6) throw std::runtime_error("metrics: malformed row '" + line + "'");
  MetricRow r;
  r.step = std::stoull(f[0]);
  r.epoch = std::stoull(f[1]);
  r.phase = f[2];
  r.loss = field(f[3]);
  r.mean_reward = field(f[4]);
  r.dev_bleu = field(f[5]);
  return r;
}

std::vector<MetricRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error("metrics: bad header in " + path);
  std::vector<MetricRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_row(line));
  return rows;
}

MetricsWriter::MetricsWriter(const std::string& path, bool resume, std::size_t keep_rows) {
  std::vector<std::string> kept;
  if (resume) {
    std::ifstream in(path);
    std::string line;
    if (in && std::getline(in, line) && line == kMetricsHeader)
      while (kept.size() < keep_rows && std::getline(in, line)) kept.push_back(line);
    if (kept.size() != keep_rows)
      throw std::runtime_error("metrics: cannot resume, " + path + " has fewer rows than the checkpoint");
  }
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + path);
  out_ << kMetricsHeader << '\n';
  for (const auto& l : kept) out_ << l << '\n';
  rows_ = kept.size();
  out_.flush();
}

void MetricsWriter::write(const MetricRow& r) {
  out_ << format_row(r) << '\n';
  out_.flush();
  ++rows_;
}

}  // namespace gbn
