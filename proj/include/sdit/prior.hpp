#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sdit {

// Binary target allocation over T timestep rows and N*M expert columns.
// Row t activates a contiguous channel-shifted window: column c (1-based) is
// on iff round(N(M-k)((t-1)/T)^alpha) < c <= round(N(M-k)(t/T)^alpha) + kN,
// rounding half away from zero.
struct PriorMask {
  int T = 0, N = 0, M = 0, k = 0;
  double alpha = 4.0;
  std::vector<std::uint8_t> rows;  // T x (N*M)

  int cols() const { return N * M; }
  std::span<const std::uint8_t> row(int t) const;  // t in 1..T
  int row_active(int t) const;                     // popcount of row t
  int delta(int t) const;                          // row_active(t) - k*N
};

PriorMask build_prior_mask(int T, int N, int M, int k, double alpha = 4.0);

// Number of columns guaranteed active at every t: max(N(2k - M), 0).
int shared_expert_lower_bound(int N, int M, int k);

// Columns (0-based) active in every row.
std::vector<int> shared_columns(const PriorMask& pm);

// Ablation: per-row random column subsets with the same popcounts as the
// channel-shifted mask.
PriorMask random_allocation_mask(int T, int N, int M, int k, std::mt19937_64& rng,
                                 double alpha = 4.0);

}  // namespace sdit
