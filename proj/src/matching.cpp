#include "sdit/matching.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sdit {

namespace {
constexpr double kBig = 1e15;  // blocks a cell without overflowing potentials

// O(n^3) assignment via potentials and augmenting paths; returns row -> col.
std::vector<int> solve_base(const std::vector<double>& a, int n) {
  const double inf = 1e30;
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> pi(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j]) pi[p[j] - 1] = j - 1;
  return pi;
}

double cost_of(std::span<const double> cost, int n, const std::vector<int>& pi) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i) * n + pi[i]];
  return s;
}
}  // namespace

std::vector<double> cdist_columns(std::span<const std::uint8_t> a,
                                  std::span<const std::uint8_t> b, int T, int C) {
  if (T < 1 || C < 1) throw std::invalid_argument("cdist: T and C must be >= 1");
  const std::size_t want = static_cast<std::size_t>(T) * C;
  if (a.size() != want || b.size() != want)
    throw std::invalid_argument("cdist: mask sizes " + std::to_string(a.size()) +
                                ", " + std::to_string(b.size()) + " != T*C = " +
                                std::to_string(want));
  std::vector<double> out(static_cast<std::size_t>(C) * C, 0.0);
  for (int t = 0; t < T; ++t) {
    const std::uint8_t* ra = a.data() + static_cast<std::size_t>(t) * C;
    const std::uint8_t* rb = b.data() + static_cast<std::size_t>(t) * C;
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < C; ++j)
        out[static_cast<std::size_t>(i) * C + j] +=
            std::fabs(static_cast<double>(ra[i]) - static_cast<double>(rb[j]));
  }
  return out;
}

std::vector<int> hungarian(std::span<const double> cost, int n) {
  if (n < 1) throw std::invalid_argument("hungarian: n must be >= 1");
  if (cost.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("hungarian: cost size " + std::to_string(cost.size()) +
                                " != n*n");
  std::vector<double> work(cost.begin(), cost.end());
  std::vector<int> base = solve_base(work, n);
  const double best = cost_of(cost, n, base);
  const double eps = 1e-9 * std::max(1.0, std::fabs(best));

  // Greedy lexicographic refinement: fix each row to the smallest column that
  // still admits an optimal completion (sub-solves on the blocked matrix).
  std::vector<int> result(n, -1);
  std::vector<char> col_used(n, 0);
  for (int i = 0; i < n; ++i) {
    int chosen = -1;
    for (int j = 0; j < n && chosen < 0; ++j) {
      if (col_used[j]) continue;
      std::vector<double> trial = work;
      for (int q = 0; q < n; ++q)
        if (q != j) trial[static_cast<std::size_t>(i) * n + q] = kBig;
      for (int r = 0; r < n; ++r)
        if (r != i) trial[static_cast<std::size_t>(r) * n + j] = kBig;
      std::vector<int> pi = solve_base(trial, n);
      if (pi[i] == j && cost_of(cost, n, pi) <= best + eps) chosen = j;
    }
    if (chosen < 0) throw std::logic_error("hungarian: refinement failed");
    result[i] = chosen;
    col_used[chosen] = 1;
    for (int q = 0; q < n; ++q)
      if (q != chosen) work[static_cast<std::size_t>(i) * n + q] = kBig;
    for (int r = 0; r < n; ++r)
      if (r != i) work[static_cast<std::size_t>(r) * n + chosen] = kBig;
  }
  return result;
}

double assignment_cost(std::span<const double> cost, int n, std::span<const int> pi) {
  if (cost.size() != static_cast<std::size_t>(n) * n ||
      pi.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("assignment_cost: size mismatch");
  std::vector<char> seen(n, 0);
  for (int i = 0; i < n; ++i) {
    if (pi[i] < 0 || pi[i] >= n || seen[pi[i]])
      throw std::invalid_argument("assignment_cost: pi is not a permutation");
    seen[pi[i]] = 1;
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i) * n + pi[i]];
  return s;
}

}  // namespace sdit
