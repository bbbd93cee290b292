#pragma once

#include <random>
#include <string>
#include <vector>

#include "sdit/params.hpp"
#include "sdit/tensor.hpp"

namespace sdit {

// How the mixture output m enters the transformer block.
enum class IntegrationMode {
  Direct,        // block input is m itself
  Mask,          // block input is z * m
  MaskSkip,      // block input z * m, skip adds z * (1 - m) after the block
  MaskSkipInit,  // MaskSkip + experts initialized so m == 1 (identity at init)
};

IntegrationMode integration_from_string(const std::string& s);
const char* to_string(IntegrationMode m);

// Expert: two-layer MLP with silu plus a constant offset channel.
// E_j(z) = W2 silu(W1 z + b1) + b2 + offset. Under MaskSkipInit W2 and b2
// start at zero and offset at one, so every expert starts as the constant
// one-vector and the mixture is exactly 1.
struct Expert {
  Tensor w1, b1, w2, b2, offset;
};

struct ExpertBank {
  int dim = 0, hidden = 0;
  std::vector<Expert> experts;
  mutable std::vector<long> eval_count;  // forward invocations per expert

  ExpertBank(ParamStore& ps, const std::string& prefix, int dim, int hidden,
             int count, IntegrationMode mode, std::mt19937_64& rng);

  Tensor forward_expert(int j, const Tensor& z) const;  // [L,d] -> [L,d]
  long total_evals() const;
  void reset_evals() const;
};

// m = sum_j g[j] E_j(z) over the selected experts only; experts with zero
// gate are never evaluated.
Tensor smoe_forward(const ExpertBank& bank, const Tensor& z, const Tensor& gate,
                    std::span<const int> active);

struct Integrated {
  Tensor block_input;
  Tensor skip;  // defined only for the skip modes: z * (1 - m)
};

Integrated integrate(IntegrationMode mode, const Tensor& z, const Tensor& m);

}  // namespace sdit
