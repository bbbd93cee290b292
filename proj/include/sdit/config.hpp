#pragma once

#include <string>
#include <vector>

#include "sdit/trainer.hpp"

namespace sdit {

struct RunConfig {
  TrainConfig train;
  std::string out_dir = "out";
};

// INI-style config: [model] / [seeds] / [train] / [run] sections of key=value
// lines, full-line comments with '#' or ';'. Unknown sections or keys are
// rejected with the offending line number.
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
RunConfig parse_run_config_file(const std::string& path);

// Canonical INI echo of every field; parses back to the same config.
std::string run_config_echo_ini(const RunConfig& cfg);

// Named gating-design presets:
//   none        top-k gating only
//   noisy       + gaussian logit noise
//   noisy_load  noise + importance balancing penalty
//   noisy_dp    noise + prior-matching loss
//   dp          prior-matching loss only (the default training recipe)
//   random_alloc  dp with the shuffled target-allocation ablation
void apply_ablation(RunConfig& cfg, const std::string& name);
const std::vector<std::string>& ablation_names();

}  // namespace sdit
