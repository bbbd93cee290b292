#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdit/params.hpp"
#include "sdit/tensor.hpp"

namespace sdit {

// Sinusoidal features of an integer timestep: dim/2 sin terms then dim/2 cos
// terms over geometrically spaced frequencies.
std::vector<double> sinusoidal_features(int t, int dim, double max_period = 10000.0);

// Two-layer MLP (silu between) over the sinusoidal features.
struct TimestepEmbedding {
  int in_dim = 0, out_dim = 0;
  Tensor w1, b1, w2, b2;

  TimestepEmbedding() = default;
  TimestepEmbedding(ParamStore& ps, const std::string& prefix, int in_dim,
                    int out_dim, std::mt19937_64& rng);
  Tensor forward(int t) const;  // [out_dim]
};

struct TopkSelection {
  Tensor gate;               // [M], zero off the selected set
  std::vector<int> indices;  // selected experts, ascending
};

// Deterministic top-k over p; ties break toward the lower index. The
// selection is a constant in the graph: gradients flow only through the
// selected probabilities. renorm divides by the selected mass.
TopkSelection topk_select(const Tensor& p, int k, bool renorm);

struct GateConfig {
  int blocks = 4;
  int experts = 3;
  int topk = 2;
  bool renorm = true;
  bool noisy = false;
};

// Per-block linear heads over the shared timestep embedding. Heads are
// zero-initialized, so routing starts degenerate (uniform probabilities,
// lowest-index experts selected everywhere); the rng parameter is the
// dedicated gating init stream (unused while heads start at zero, kept so
// the stream stays independent of the core weights).
struct GatingNetwork {
  GateConfig cfg;
  std::vector<Tensor> head_w;      // per block [d, M]
  std::vector<Tensor> head_b;      // per block [M]
  std::vector<Tensor> noise_gain;  // per block [M]; std = softplus(gain)

  GatingNetwork() = default;
  GatingNetwork(ParamStore& ps, GateConfig cfg, int model_dim, std::mt19937_64& rng);

  Tensor logits(int block, const Tensor& e) const;
  Tensor probs(int block, const Tensor& e) const;  // softmax(h_i(e)), noise-free
  // softmax(h_i(e) + z * softplus(gain)), z drawn from rng (reparameterized,
  // so the gain is trainable through the draw)
  Tensor noisy_probs(int block, const Tensor& e, std::mt19937_64& rng) const;

  // Deterministic (noise-free) stacked selection for one timestep embedding:
  // N*M zeros/ones, k per block.
  std::vector<std::uint8_t> activation_row(const Tensor& e) const;
};

}  // namespace sdit
