#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "sdit/prior.hpp"

using namespace sdit;

namespace {

// Independent oracle for one row: active 1-based columns are
// lo(t) < c <= hi(t) with lo/hi from the rounded channel-shift.
std::vector<std::uint8_t> oracle_row(int t, int T, int N, int M, int k, double alpha) {
  auto shift = [&](double u) {
    double x = N * (M - k) * std::pow(u, alpha);
    // round half away from zero
    return (int)(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
  };
  int lo = shift((t - 1.0) / T);
  int hi = shift((double)t / T) + k * N;
  std::vector<std::uint8_t> row(N * M, 0);
  for (int c = lo + 1; c <= hi; ++c) row[c - 1] = 1;
  return row;
}

}  // namespace

TEST_CASE("hand-checked mask rows for T=4, N=2, M=3, k=2, alpha=4") {
  // Shifts at t/T in {1/4, 1/2, 3/4, 1}: round(2*(u^4)) = 0, 0, 1, 2.
  // Active windows (1-based): t=1 -> 1..4, t=2 -> 1..4, t=3 -> 1..5, t=4 -> 2..6.
  auto pm = build_prior_mask(4, 2, 3, 2, 4.0);
  using R = std::vector<std::uint8_t>;
  CHECK(R(pm.row(1).begin(), pm.row(1).end()) == R{1, 1, 1, 1, 0, 0});
  CHECK(R(pm.row(2).begin(), pm.row(2).end()) == R{1, 1, 1, 1, 0, 0});
  CHECK(R(pm.row(3).begin(), pm.row(3).end()) == R{1, 1, 1, 1, 1, 0});
  CHECK(R(pm.row(4).begin(), pm.row(4).end()) == R{0, 1, 1, 1, 1, 1});
  CHECK(pm.delta(1) == 0);
  CHECK(pm.delta(2) == 0);
  CHECK(pm.delta(3) == 1);
  CHECK(pm.delta(4) == 1);
}

TEST_CASE("rounding is half away from zero, not banker's") {
  // T=2, N=1, M=2, k=1, alpha=1: the t=1 upper shift is round(0.5).
  // Half-away gives 1 (row {1,1}); banker's rounding would give {1,0}.
  auto pm = build_prior_mask(2, 1, 2, 1, 1.0);
  using R = std::vector<std::uint8_t>;
  CHECK(R(pm.row(1).begin(), pm.row(1).end()) == R{1, 1});
  CHECK(R(pm.row(2).begin(), pm.row(2).end()) == R{0, 1});
}

TEST_CASE("mask rows match the independent closed-form oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    int N = 1 + (int)(rng() % 6);
    int M = 2 + (int)(rng() % 5);
    int k = 1 + (int)(rng() % (M - 1));
    int T = 2 + (int)(rng() % 120);
    double alpha = std::vector<double>{0.5, 1.0, 2.0, 4.0, 8.0}[rng() % 5];
    auto pm = build_prior_mask(T, N, M, k, alpha);
    for (int t = 1; t <= T; ++t) {
      auto want = oracle_row(t, T, N, M, k, alpha);
      auto got = pm.row(t);
      REQUIRE(got.size() == want.size());
      CHECK(std::equal(got.begin(), got.end(), want.begin()));
    }
  }
}

TEST_CASE("telescoping: total over-activation equals N(M-k)") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 80; ++trial) {
    int N = 1 + (int)(rng() % 8);
    int M = 2 + (int)(rng() % 6);
    int k = 1 + (int)(rng() % (M - 1));
    int T = 1 + (int)(rng() % 300);
    double alpha = std::vector<double>{0.5, 1.0, 3.0, 4.0}[rng() % 4];
    auto pm = build_prior_mask(T, N, M, k, alpha);
    long sum = 0;
    for (int t = 1; t <= T; ++t) sum += pm.delta(t);
    CHECK(sum == (long)N * (M - k));
    // The window starts at column 1 and ends flush with column NM.
    CHECK(pm.row(1)[0] == 1);
    CHECK(pm.row(T)[N * M - 1] == 1);
  }
}

TEST_CASE("shared-column lower bound and exact small cases") {
  CHECK(shared_expert_lower_bound(12, 4, 2) == 0);
  CHECK(shared_expert_lower_bound(12, 3, 2) == 12);
  CHECK(shared_expert_lower_bound(12, 4, 3) == 24);
  CHECK(shared_expert_lower_bound(1, 2, 1) == 0);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    int N = 1 + (int)(rng() % 6);
    int M = 2 + (int)(rng() % 4);
    int k = 1 + (int)(rng() % (M - 1));
    int T = 2 + (int)(rng() % 200);
    auto pm = build_prior_mask(T, N, M, k, 4.0);
    auto shared = shared_columns(pm);
    CHECK((int)shared.size() >= shared_expert_lower_bound(N, M, k));
    // Shared columns really are on in every row.
    for (int c : shared)
      for (int t = 1; t <= T; ++t) CHECK(pm.row(t)[c] == 1);
  }
}

TEST_CASE("random allocation keeps per-row popcounts but scrambles columns") {
  std::mt19937_64 rng(23);
  auto pm = build_prior_mask(64, 3, 3, 2, 4.0);
  auto ra = random_allocation_mask(64, 3, 3, 2, rng, 4.0);
  REQUIRE(ra.T == pm.T);
  REQUIRE(ra.cols() == pm.cols());
  bool any_diff = false;
  for (int t = 1; t <= 64; ++t) {
    CHECK(ra.row_active(t) == pm.row_active(t));
    auto a = pm.row(t), b = ra.row(t);
    if (!std::equal(a.begin(), a.end(), b.begin())) any_diff = true;
  }
  CHECK(any_diff);
  long sum = 0;
  for (int t = 1; t <= 64; ++t) sum += ra.delta(t);
  CHECK(sum == 3 * (3 - 2));
}

TEST_CASE("row accessor bounds and argument validation") {
  auto pm = build_prior_mask(10, 2, 3, 2);
  CHECK_THROWS(pm.row(0));
  CHECK_THROWS(pm.row(11));
  CHECK_THROWS(build_prior_mask(0, 2, 3, 2));
  CHECK_THROWS(build_prior_mask(10, 0, 3, 2));
  CHECK_THROWS(build_prior_mask(10, 2, 3, 3));  // k must be < M
  CHECK_THROWS(build_prior_mask(10, 2, 3, 0));
  CHECK_THROWS(build_prior_mask(10, 2, 3, 2, 0.0));  // alpha must be positive
}
