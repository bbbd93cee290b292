#include "sdit/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sdit {

namespace {

struct Gram {
  int na = 0, nb = 0;
  std::vector<double> k;  // (na+nb)^2 kernel matrix over the pooled points

  double at(int i, int j) const { return k[static_cast<std::size_t>(i) * (na + nb) + j]; }
};

Gram build_gram(const std::vector<std::vector<double>>& a,
                const std::vector<std::vector<double>>& b) {
  if (a.size() < 64 || b.size() < 64)
    throw std::invalid_argument("mmd: need >= 64 samples per side, got " +
                                std::to_string(a.size()) + " and " +
                                std::to_string(b.size()));
  const std::size_t dim = a[0].size();
  auto point = [&](int i) -> const std::vector<double>& {
    return i < static_cast<int>(a.size()) ? a[i] : b[i - a.size()];
  };
  const int n = static_cast<int>(a.size() + b.size());
  for (int i = 0; i < n; ++i)
    if (point(i).size() != dim)
      throw std::invalid_argument("mmd: inconsistent sample dimensions");

  std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& p = point(i);
      const auto& q = point(j);
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double dd = p[c] - q[c];
        s += dd * dd;
      }
      d2[static_cast<std::size_t>(i) * n + j] = s;
      d2[static_cast<std::size_t>(j) * n + i] = s;
      dists.push_back(std::sqrt(s));
    }
  }
  // median heuristic bandwidth (lower middle for even counts)
  const std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double h = dists[mid];
  if (!(h > 0.0)) h = 1e-12;
  const double gamma = 1.0 / (2.0 * h * h);

  Gram g;
  g.na = static_cast<int>(a.size());
  g.nb = static_cast<int>(b.size());
  g.k.resize(d2.size());
  for (std::size_t i = 0; i < d2.size(); ++i) g.k[i] = std::exp(-gamma * d2[i]);
  return g;
}

double mmd2_from_gram(const Gram& g, const std::vector<int>& ia,
                      const std::vector<int>& ib) {
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (int i : ia)
    for (int j : ia) kaa += g.at(i, j);
  for (int i : ib)
    for (int j : ib) kbb += g.at(i, j);
  for (int i : ia)
    for (int j : ib) kab += g.at(i, j);
  const double na = static_cast<double>(ia.size());
  const double nb = static_cast<double>(ib.size());
  return kaa / (na * na) + kbb / (nb * nb) - 2.0 * kab / (na * nb);
}

}  // namespace

double mmd2_biased(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
  Gram g = build_gram(a, b);
  std::vector<int> ia(g.na), ib(g.nb);
  std::iota(ia.begin(), ia.end(), 0);
  std::iota(ib.begin(), ib.end(), g.na);
  return mmd2_from_gram(g, ia, ib);
}

double mmd2_permutation_threshold(const std::vector<std::vector<double>>& a,
                                  const std::vector<std::vector<double>>& b,
                                  int permutations, double percentile,
                                  std::mt19937_64& rng) {
  if (permutations < 1)
    throw std::invalid_argument("mmd: permutations must be >= 1");
  if (!(percentile > 0.0 && percentile < 1.0))
    throw std::invalid_argument("mmd: percentile must be in (0, 1)");
  Gram g = build_gram(a, b);
  const int n = g.na + g.nb;
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<double> stats(permutations);
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<int> ia(pool.begin(), pool.begin() + g.na);
    std::vector<int> ib(pool.begin() + g.na, pool.end());
    stats[p] = mmd2_from_gram(g, ia, ib);
  }
  std::sort(stats.begin(), stats.end());
  const int rank = std::clamp(
      static_cast<int>(std::ceil(percentile * permutations)) - 1, 0, permutations - 1);
  return stats[rank];
}

}  // namespace sdit
