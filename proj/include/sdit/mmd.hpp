#pragma once

#include <random>
#include <vector>

namespace sdit {

// Biased (V-statistic) squared maximum mean discrepancy with an RBF kernel.
// The bandwidth is the median pairwise Euclidean distance over the combined
// set (the usual median heuristic). Requires >= 64 points per side so the
// permutation null below is meaningful; identical sets give exactly 0.
double mmd2_biased(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b);

// Null distribution threshold: permute the pooled samples `permutations`
// times, recompute MMD^2 on each split, return the given percentile
// (nearest-rank). Deterministic given the rng state.
double mmd2_permutation_threshold(const std::vector<std::vector<double>>& a,
                                  const std::vector<std::vector<double>>& b,
                                  int permutations, double percentile,
                                  std::mt19937_64& rng);

}  // namespace sdit
