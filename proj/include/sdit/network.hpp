#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sdit/gating.hpp"
#include "sdit/params.hpp"
#include "sdit/smoe.hpp"
#include "sdit/tensor.hpp"

namespace sdit {

struct ModelConfig {
  int blocks = 4;
  int dim = 64;
  int heads = 4;
  int experts = 3;
  int topk = 2;
  int timesteps = 100;
  int image = 16;
  int patch = 4;
  int classes = 0;     // 0 = unconditional
  int raw_embed = 64;  // sinusoidal feature width fed to the timestep MLP
  IntegrationMode integration = IntegrationMode::MaskSkipInit;
  bool gate_renorm = true;
  bool noisy_gating = false;
  bool smoe = true;  // false: plain transformer baseline, no expert layers
  double ln_eps = 1e-12;

  int tokens() const { return (image / patch) * (image / patch); }
  void validate() const;
};

struct BlockParams {
  Tensor wqkv, bqkv, wproj, bproj, wff1, bff1, wff2, bff2, wmod, bmod;
};

// Per-forward routing record used by the losses and metrics.
struct GateState {
  std::vector<Tensor> p;                   // per block [M] (the trained path)
  std::vector<Tensor> g;                   // per block [M], sparse
  std::vector<std::vector<int>> selected;  // per block, ascending
  Tensor p_tot;                            // concat of p, [N*M]
  std::vector<std::uint8_t> w_gate;        // indicator of g_tot > 0
};

// Independent init streams; varying `gating` or `experts` must not change
// the init-time function of the network (zero-init gate heads, expert output
// layers masked at init under mask_skip_init).
struct ModelSeeds {
  std::uint64_t core = 1;
  std::uint64_t gating = 2;
  std::uint64_t experts = 3;
};

class Model {
 public:
  Model(const ModelConfig& cfg, ModelSeeds seeds);

  ModelConfig cfg;
  ParamStore params;
  TimestepEmbedding embed;
  GatingNetwork gating;
  std::vector<ExpertBank> banks;
  std::vector<BlockParams> blocks;
  Tensor patch_w, patch_b, pos_embed, label_table;
  Tensor final_mod_w, final_mod_b, head_w, head_b;

  // x: [image, image]; t: 1..timesteps; label: 0..classes-1 or -1 for the
  // null/none embedding. noise_rng drives noisy gating when enabled.
  Tensor predict_noise(const Tensor& x, int t, int label, GateState* gs = nullptr,
                       std::mt19937_64* noise_rng = nullptr) const;
  // Final token stream before the output head (tests compare block stacks).
  Tensor forward_tokens(const Tensor& x, int t, int label) const;

  Tensor condition(int t, int label) const;         // adaLN input c
  std::vector<std::uint8_t> gate_row(int t) const;  // noise-free w_gate row
  std::vector<std::uint8_t> gate_map() const;       // [T x N*M]

  long expert_evals_and_reset() const;
  std::vector<long> expert_eval_counts() const;  // flattened [N x M]

 private:
  std::vector<std::int64_t> patch_idx_, unpatch_idx_;
  Tensor ln_gamma_, ln_beta_;  // constant non-affine layer-norm params

  Tensor run_tokens(const Tensor& x, int t, int label, GateState* gs,
                    std::mt19937_64* noise_rng) const;
  Tensor attention(const BlockParams& blk, const Tensor& x) const;
};

}  // namespace sdit
