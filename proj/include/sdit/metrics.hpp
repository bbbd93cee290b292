#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace sdit {

// One row of the training metrics table.
struct MetricsRow {
  std::int64_t step = 0;
  double loss_noise = 0.0;
  double loss_dp = 0.0;
  double loss_load = 0.0;
  double loss_total = 0.0;
  double match_cost = 0.0;   // assignment cost at the last matching refresh
  std::int64_t expert_evals = 0;  // expert MLP evaluations this step
  int gate_stable = 0;       // 1 when the activation map matches the previous step
  std::int64_t hamming_online_ema = 0;  // map distance: online vs EMA weights
};

// CSV writer for training metrics. Comment lines ('#') carry the run config
// echo and the build version so a metrics file is self-describing.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::vector<std::string>& comments);

  void write(const MetricsRow& row);

  static std::string format_double(double v);  // round-trippable %.17g

 private:
  std::ofstream out_;
};

}  // namespace sdit
