#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdit/network.hpp"
#include "sdit/prior.hpp"
#include "sdit/sampler.hpp"
#include "sdit/trainer.hpp"

namespace sdit {

// Comment lines every artifact embeds: the config echo and build version.
std::vector<std::string> artifact_comments(const TrainConfig& cfg);

// Stacked activation maps as CSV + PGM plus a per-block denoising-path
// summary (shared vs per-step experts) under dir/.
void write_routing_artifacts(const std::string& dir, const Model& model,
                             const PriorMask& prior, const TrainConfig& cfg);

// Matching diagnostics: cost matrix, permutation, per-timestep prior loss.
void write_match_debug(const std::string& path, const Model& model,
                       const PriorMask& prior, const TrainConfig& cfg);

struct EvalConfig {
  int samples = 128;
  int sample_steps = 50;
  double guidance = 1.0;  // conditional models sample classes round-robin
  std::uint64_t seed = 4242;
  int heldout = 256;
  int permutations = 200;
  double percentile = 0.95;
};

struct EvalResult {
  double mmd2 = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// Samples from the model (EMA weights should already be swapped in by the
// caller when desired), compares against a fresh held-out draw of the
// training distribution, writes JSON, returns the numbers.
EvalResult run_eval(const std::string& json_path, const Model& model,
                    const TrainConfig& cfg, const EvalConfig& ec);

}  // namespace sdit
