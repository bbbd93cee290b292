#pragma once

#include <cstdint>
#include <vector>

#include "sdit/network.hpp"
#include "sdit/schedule.hpp"

namespace sdit {

struct SampleConfig {
  int count = 16;
  int steps = 100;        // respaced DDPM steps, <= schedule T
  double guidance = 1.0;  // >= 1; 1 disables the guided combination
  int label = -1;         // class for conditional models, -1 unconditional
  std::uint64_t seed = 99;
};

// Ancestral DDPM sampling with uniform-stride respacing and classifier-free
// guidance eps_null + s (eps_label - eps_null). Outputs are clamped to
// [-1, 1]. Deterministic per seed. Swap in EMA weights via EmaScope first.
std::vector<std::vector<double>> sample_images(const Model& model,
                                               const NoiseSchedule& full,
                                               const SampleConfig& sc);

}  // namespace sdit
