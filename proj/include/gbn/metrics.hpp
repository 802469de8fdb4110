// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace gbn {

// One CSV row. NaN fields are written empty.
struct MetricRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::string phase;  // pretrain | bridge-step | generator-step | eval
  double loss = NAN;
  double mean_reward = NAN;
  double dev_bleu = NAN;
};

inline constexpr const char* kMetricsHeader = "step,epoch,phase,loss,mean_reward,dev_bleu";

std::string format_row(const MetricRow& r);
MetricRow parse_row(const std::string& line);
std::vector<MetricRow> read_metrics(const std::string& path);

class MetricsWriter {
 public:
  // Starts a fresh file, or keeps the header and the first `keep_rows` rows of
  // an existing one when resuming.
  MetricsWriter(const std::string& path, bool resume, std::size_t keep_rows);
  void write(const MetricRow& r);
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t rows_ = 0;
};

}  // namespace gbn
