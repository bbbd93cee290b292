#pragma once

#include <cstdint>
#include <span>

#include "sdit/ops.hpp"
#include "sdit/tensor.hpp"

namespace sdit {

// Jensen-Shannon divergence after renormalizing each side to sum 1.
// Rejects nonpositive totals.
Tensor jsd(const Tensor& p, const Tensor& q);

// Matching-aligned prior term for one timestep: stack the gate probabilities
// of all blocks (p_tot, length N*M), map entry i onto prior column pi[i],
// renormalize both sides and take the JSD against the prior row.
Tensor diffusion_prior_loss(const Tensor& p_tot, std::span<const int> pi,
                            std::span<const std::uint8_t> prior_row);

Tensor total_loss(const Tensor& noise_loss, const Tensor& dp_loss, double lambda_dp);

// Squared coefficient of variation of per-expert importance, summed over
// blocks (importance[i] is the per-expert summed probability for block i).
Tensor load_balance_loss(std::span<const Tensor> importance);

}  // namespace sdit
