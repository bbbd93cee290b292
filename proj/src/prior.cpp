#include "sdit/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sdit {

namespace {
void validate(int T, int N, int M, int k, double alpha) {
  if (T < 1) throw std::invalid_argument("prior: T must be >= 1");
  if (N < 1) throw std::invalid_argument("prior: N must be >= 1");
  if (k < 1 || k >= M)
    throw std::invalid_argument("prior: need 1 <= k < M, got k=" + std::to_string(k) +
                                " M=" + std::to_string(M));
  if (!(alpha > 0.0)) throw std::invalid_argument("prior: alpha must be > 0");
}

// round half away from zero (arguments here are always >= 0)
long long rnd(double x) { return std::llround(x); }
}  // namespace

std::span<const std::uint8_t> PriorMask::row(int t) const {
  if (t < 1 || t > T)
    throw std::invalid_argument("prior row " + std::to_string(t) + " outside 1.." +
                                std::to_string(T));
  return {rows.data() + static_cast<std::size_t>(t - 1) * cols(),
          static_cast<std::size_t>(cols())};
}

int PriorMask::row_active(int t) const {
  auto r = row(t);
  return static_cast<int>(std::accumulate(r.begin(), r.end(), 0));
}

int PriorMask::delta(int t) const { return row_active(t) - k * N; }

PriorMask build_prior_mask(int T, int N, int M, int k, double alpha) {
  validate(T, N, M, k, alpha);
  PriorMask pm;
  pm.T = T;
  pm.N = N;
  pm.M = M;
  pm.k = k;
  pm.alpha = alpha;
  const int C = N * M;
  pm.rows.assign(static_cast<std::size_t>(T) * C, 0);
  const double span = static_cast<double>(N) * (M - k);
  for (int t = 1; t <= T; ++t) {
    const long long lo = rnd(span * std::pow((t - 1.0) / T, alpha));
    const long long hi = rnd(span * std::pow(static_cast<double>(t) / T, alpha)) +
                         static_cast<long long>(k) * N;
    for (int c = 1; c <= C; ++c)
      if (lo < c && c <= hi)
        pm.rows[static_cast<std::size_t>(t - 1) * C + (c - 1)] = 1;
  }
  return pm;
}

int shared_expert_lower_bound(int N, int M, int k) {
  return std::max(N * (2 * k - M), 0);
}

std::vector<int> shared_columns(const PriorMask& pm) {
  std::vector<int> out;
  for (int c = 0; c < pm.cols(); ++c) {
    bool all = true;
    for (int t = 1; t <= pm.T && all; ++t)
      if (!pm.row(t)[c]) all = false;
    if (all) out.push_back(c);
  }
  return out;
}

PriorMask random_allocation_mask(int T, int N, int M, int k, std::mt19937_64& rng,
                                 double alpha) {
  PriorMask shifted = build_prior_mask(T, N, M, k, alpha);
  PriorMask pm = shifted;
  std::fill(pm.rows.begin(), pm.rows.end(), 0);
  const int C = N * M;
  std::vector<int> cols(C);
  for (int t = 1; t <= T; ++t) {
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), rng);
    const int active = shifted.row_active(t);
    for (int i = 0; i < active; ++i)
      pm.rows[static_cast<std::size_t>(t - 1) * C + cols[i]] = 1;
  }
  return pm;
}

}  // namespace sdit
