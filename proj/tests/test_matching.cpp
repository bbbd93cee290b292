#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sdit/matching.hpp"

using namespace sdit;

namespace {

// Exhaustive assignment oracle: minimum cost and the lexicographically
// smallest argmin permutation.
struct Best {
  double cost;
  std::vector<int> pi;
};

Best brute_force(const std::vector<double>& cost, int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Best best{std::numeric_limits<double>::infinity(), {}};
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost[i * n + perm[i]];
    if (c < best.cost - 1e-12) best = {c, perm};
    // std::next_permutation enumerates in lexicographic order, so the first
    // permutation hitting the minimum is already the lex-smallest argmin.
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("hungarian equals exhaustive minimum on random real matrices") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> dist(0.0, 10.0);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 1 + (int)(rng() % 6);
    std::vector<double> cost(n * n);
    for (auto& c : cost) c = dist(rng);
    auto pi = hungarian(cost, n);
    auto want = brute_force(cost, n);
    CHECK(assignment_cost(cost, n, pi) == doctest::Approx(want.cost).epsilon(1e-12));
  }
}

TEST_CASE("hungarian returns the lexicographically smallest optimum under ties") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 120; ++trial) {
    int n = 2 + (int)(rng() % 5);
    // Small integer costs force many ties.
    std::vector<double> cost(n * n);
    for (auto& c : cost) c = (double)(rng() % 3);
    auto pi = hungarian(cost, n);
    auto want = brute_force(cost, n);
    CHECK(assignment_cost(cost, n, pi) == doctest::Approx(want.cost).epsilon(1e-12));
    CHECK(pi == want.pi);
  }
}

TEST_CASE("hungarian hand cases") {
  // Identity is optimal and lex-smallest on a zero matrix.
  std::vector<double> zeros(16, 0.0);
  CHECK(hungarian(zeros, 4) == std::vector<int>{0, 1, 2, 3});

  // Classic 3x3 with a unique optimum.
  std::vector<double> c = {4, 1, 3, 2, 0, 5, 3, 2, 2};
  auto pi = hungarian(c, 3);
  CHECK(pi == std::vector<int>{1, 0, 2});
  CHECK(assignment_cost(c, 3, pi) == 5.0);

  // n = 1.
  std::vector<double> one = {7.0};
  CHECK(hungarian(one, 1) == std::vector<int>{0});
}

TEST_CASE("hungarian is a permutation and stable under repeated solves") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  int n = 12;
  std::vector<double> cost(n * n);
  for (auto& c : cost) c = std::floor(dist(rng) * 4.0);
  auto pi1 = hungarian(cost, n);
  auto pi2 = hungarian(cost, n);
  CHECK(pi1 == pi2);
  std::vector<int> seen(n, 0);
  for (int v : pi1) {
    REQUIRE(v >= 0);
    REQUIRE(v < n);
    seen[v]++;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

TEST_CASE("cdist_columns equals the per-column L1 oracle") {
  std::mt19937_64 rng(53);
  int T = 37, C = 9;
  std::vector<std::uint8_t> a(T * C), b(T * C);
  for (auto& v : a) v = rng() % 2;
  for (auto& v : b) v = rng() % 2;
  auto d = cdist_columns(a, b, T, C);
  REQUIRE(d.size() == (std::size_t)C * C);
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < C; ++j) {
      double want = 0.0;
      for (int t = 0; t < T; ++t) want += std::abs((int)a[t * C + i] - (int)b[t * C + j]);
      CHECK(d[i * C + j] == want);
    }
}

TEST_CASE("cdist_columns hand case") {
  // T=3, C=2. Columns of a: (1,0,1), (0,0,1). Columns of b: (1,1,1), (0,0,0).
  std::vector<std::uint8_t> a = {1, 0, 0, 0, 1, 1};
  std::vector<std::uint8_t> b = {1, 0, 1, 0, 1, 0};
  auto d = cdist_columns(a, b, 3, 2);
  CHECK(d == std::vector<double>{1, 2, 2, 1});
}

TEST_CASE("assignment_cost sums the selected entries") {
  std::vector<double> c = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> pi = {2, 0, 1};
  CHECK(assignment_cost(c, 3, pi) == 3.0 + 4.0 + 8.0);
}

TEST_CASE("matching input validation") {
  std::vector<double> c(9, 0.0);
  CHECK_THROWS(hungarian(c, 4));  // size mismatch
  std::vector<std::uint8_t> a(6), b(8);
  CHECK_THROWS(cdist_columns(a, b, 3, 2));  // b wrong size
}
