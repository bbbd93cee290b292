#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sdit/mmd.hpp"

using namespace sdit;

namespace {

std::vector<std::vector<double>> gaussian_cloud(int n, int d, double shift,
                                                std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& row : out)
    for (auto& v : row) v = nd(rng) + shift;
  return out;
}

// Independent oracle: full recompute with its own median-bandwidth RBF.
double mmd2_oracle(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  const int n = (int)all.size();
  std::vector<double> d2(n * n);
  std::vector<double> dists;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < all[i].size(); ++k) {
        double diff = all[i][k] - all[j][k];
        s += diff * diff;
      }
      d2[i * n + j] = s;
      if (j > i) dists.push_back(std::sqrt(s));
    }
  std::sort(dists.begin(), dists.end());
  double h = dists[(dists.size() - 1) / 2];  // lower-middle median
  h = std::max(h, 1e-12);
  double gamma = 1.0 / (2.0 * h * h);
  auto kern = [&](int i, int j) { return std::exp(-gamma * d2[i * n + j]); };
  const int na = (int)a.size(), nb = (int)b.size();
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) kaa += kern(i, j);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) kbb += kern(na + i, na + j);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) kab += kern(i, na + j);
  return kaa / ((double)na * na) + kbb / ((double)nb * nb) -
         2.0 * kab / ((double)na * nb);
}

}  // namespace

TEST_CASE("mmd2 matches the independent oracle") {
  std::mt19937_64 rng(3);
  auto a = gaussian_cloud(70, 5, 0.0, rng);
  auto b = gaussian_cloud(80, 5, 0.4, rng);
  CHECK(mmd2_biased(a, b) == doctest::Approx(mmd2_oracle(a, b)).epsilon(1e-12));
}

TEST_CASE("identical sets give exactly zero; shifts grow the statistic") {
  std::mt19937_64 rng(5);
  auto a = gaussian_cloud(64, 4, 0.0, rng);
  CHECK(mmd2_biased(a, a) == doctest::Approx(0.0).epsilon(1e-12));

  auto near = gaussian_cloud(64, 4, 0.2, rng);
  auto far = gaussian_cloud(64, 4, 2.0, rng);
  double dn = mmd2_biased(a, near), df = mmd2_biased(a, far);
  CHECK(dn > 0.0);
  CHECK(df > dn);
}

TEST_CASE("same-distribution samples fall below the permutation threshold") {
  std::mt19937_64 rng(7);
  auto a = gaussian_cloud(96, 6, 0.0, rng);
  auto b = gaussian_cloud(96, 6, 0.0, rng);
  double stat = mmd2_biased(a, b);
  std::mt19937_64 prng(11);
  double thr = mmd2_permutation_threshold(a, b, 200, 0.95, prng);
  CHECK(stat < thr);
}

TEST_CASE("shifted distributions exceed the permutation threshold") {
  std::mt19937_64 rng(13);
  auto a = gaussian_cloud(96, 6, 0.0, rng);
  auto b = gaussian_cloud(96, 6, 1.5, rng);
  double stat = mmd2_biased(a, b);
  std::mt19937_64 prng(17);
  double thr = mmd2_permutation_threshold(a, b, 200, 0.95, prng);
  CHECK(stat > thr);
}

TEST_CASE("threshold is deterministic given the rng and monotone in percentile") {
  std::mt19937_64 rng(19);
  auto a = gaussian_cloud(64, 3, 0.0, rng);
  auto b = gaussian_cloud(64, 3, 0.3, rng);
  std::mt19937_64 r1(23), r2(23), r3(23);
  double t1 = mmd2_permutation_threshold(a, b, 100, 0.95, r1);
  double t2 = mmd2_permutation_threshold(a, b, 100, 0.95, r2);
  CHECK(t1 == t2);
  double t50 = mmd2_permutation_threshold(a, b, 100, 0.50, r3);
  CHECK(t50 <= t1);
}

TEST_CASE("input validation") {
  std::mt19937_64 rng(29);
  auto small = gaussian_cloud(10, 3, 0.0, rng);
  auto ok = gaussian_cloud(64, 3, 0.0, rng);
  CHECK_THROWS(mmd2_biased(small, ok));  // < 64 per side
  CHECK_THROWS(mmd2_biased(ok, small));
  auto ragged = ok;
  ragged[5].push_back(1.0);
  CHECK_THROWS(mmd2_biased(ragged, ok));  // inconsistent dims
  std::mt19937_64 prng(31);
  CHECK_THROWS(mmd2_permutation_threshold(ok, ok, 0, 0.95, prng));
  CHECK_THROWS(mmd2_permutation_threshold(ok, ok, 10, 1.5, prng));
}
