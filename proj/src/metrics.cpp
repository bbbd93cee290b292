#include "sdit/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace sdit {

std::string MetricsWriter::format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path,
                             const std::vector<std::string>& comments)
    : out_(path) {
  if (!out_) throw std::runtime_error("metrics: cannot open " + path);
  for (const auto& c : comments) out_ << "# " << c << "\n";
  out_ << "step,loss_noise,loss_dp,loss_load,loss_total,match_cost,"
          "expert_evals,gate_stable,hamming_online_ema\n";
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << row.step << ',' << format_double(row.loss_noise) << ','
       << format_double(row.loss_dp) << ',' << format_double(row.loss_load) << ','
       << format_double(row.loss_total) << ',' << format_double(row.match_cost)
       << ',' << row.expert_evals << ',' << row.gate_stable << ','
       << row.hamming_online_ema << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("metrics: write failed");
}

}  // namespace sdit
