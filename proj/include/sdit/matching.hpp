#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sdit {

// Column-to-column L1 distance matrix between two stacked binary masks of
// shape [T x C] (row-major). out[i*C + j] = sum_t |A[t,i] - B[t,j]|; for
// binary masks this is the Hamming distance between columns.
std::vector<double> cdist_columns(std::span<const std::uint8_t> a,
                                  std::span<const std::uint8_t> b, int T, int C);

// Minimum-cost perfect matching on a square cost matrix (row-major n x n).
// Returns pi with pi[i] = assigned column. Among all optimal assignments the
// lexicographically smallest pi is returned, so ties break toward the lowest
// column index deterministically.
std::vector<int> hungarian(std::span<const double> cost, int n);

double assignment_cost(std::span<const double> cost, int n,
                       std::span<const int> pi);

}  // namespace sdit
