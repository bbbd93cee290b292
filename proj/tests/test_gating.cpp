#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sdit/gating.hpp"
#include "sdit/ops.hpp"
#include "sdit/params.hpp"

using namespace sdit;

TEST_CASE("sinusoidal features: sin half then cos half, geometric frequencies") {
  const int dim = 8;
  auto f = sinusoidal_features(5, dim);
  REQUIRE(f.size() == (std::size_t)dim);
  for (int i = 0; i < dim / 2; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / (dim / 2));
    CHECK(f[i] == doctest::Approx(std::sin(5.0 * freq)).epsilon(1e-12));
    CHECK(f[dim / 2 + i] == doctest::Approx(std::cos(5.0 * freq)).epsilon(1e-12));
  }
  CHECK_THROWS(sinusoidal_features(5, 7));  // odd width
}

TEST_CASE("timestep embedding is deterministic and t-dependent") {
  ParamStore ps;
  std::mt19937_64 rng(3);
  TimestepEmbedding emb(ps, "emb", 16, 32, rng);
  auto a1 = emb.forward(3), a2 = emb.forward(3), b = emb.forward(4);
  REQUIRE(a1.numel() == 32);
  bool same = true, diff = false;
  for (int i = 0; i < 32; ++i) {
    same = same && a1.values()[i] == a2.values()[i];
    diff = diff || a1.values()[i] != b.values()[i];
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("topk_select picks the k largest, ties toward the lower index") {
  Tensor p = Tensor::from({0.2, 0.4, 0.1, 0.3}, {4});
  auto sel = topk_select(p, 2, false);
  CHECK(sel.indices == std::vector<int>{1, 3});
  CHECK(sel.gate.values()[1] == 0.4);
  CHECK(sel.gate.values()[3] == 0.3);
  CHECK(sel.gate.values()[0] == 0.0);
  CHECK(sel.gate.values()[2] == 0.0);

  // Exact tie: 0.4 at indices 0 and 2 — index 0 wins the second slot.
  Tensor q = Tensor::from({0.4, 0.5, 0.4, 0.1}, {4});
  auto tie = topk_select(q, 2, false);
  CHECK(tie.indices == std::vector<int>{0, 1});

  // All equal: lowest k indices.
  Tensor u = Tensor::from({0.25, 0.25, 0.25, 0.25}, {4});
  CHECK(topk_select(u, 3, false).indices == std::vector<int>{0, 1, 2});
}

TEST_CASE("topk_select renorm divides by the selected mass") {
  Tensor p = Tensor::from({0.2, 0.4, 0.1, 0.3}, {4});
  auto sel = topk_select(p, 2, true);
  CHECK(sel.gate.values()[1] == doctest::Approx(0.4 / 0.7).epsilon(1e-12));
  CHECK(sel.gate.values()[3] == doctest::Approx(0.3 / 0.7).epsilon(1e-12));
  double mass = 0.0;
  for (double v : sel.gate.values()) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("topk_select gradient flows only through selected entries") {
  // Weight the gate entries distinctly; the renormalized sum alone is the
  // constant 1 and would have an all-zero gradient.
  Tensor p = Tensor::from({0.2, 0.4, 0.1, 0.3}, {4}).set_requires_grad(true);
  Tensor w = Tensor::from({1.0, 2.0, 3.0, 4.0}, {4});
  auto sel = topk_select(p, 2, true);
  backward(sum(mul(sel.gate, w)), GradMode::Reset);
  CHECK(p.grad()[0] == 0.0);
  CHECK(p.grad()[2] == 0.0);
  CHECK(p.grad()[1] != 0.0);
  CHECK(p.grad()[3] != 0.0);

  // Analytic check: d/dp1 [2 p1/(p1+p3) + 4 p3/(p1+p3)] = (2-4) p3/(p1+p3)^2.
  double s = 0.4 + 0.3;
  CHECK(p.grad()[1] == doctest::Approx(-2.0 * 0.3 / (s * s)).epsilon(1e-12));
  CHECK(p.grad()[3] == doctest::Approx(2.0 * 0.4 / (s * s)).epsilon(1e-12));
}

TEST_CASE("topk_select validates k") {
  Tensor p = Tensor::from({0.5, 0.5}, {2});
  CHECK_THROWS(topk_select(p, 0, false));
  CHECK_THROWS(topk_select(p, 3, false));
}

TEST_CASE("zero-initialized heads start uniform with lowest-k selection") {
  ParamStore ps;
  std::mt19937_64 core(1), grng(2);
  TimestepEmbedding emb(ps, "emb", 8, 12, core);
  GateConfig gc{.blocks = 3, .experts = 4, .topk = 2, .renorm = true, .noisy = false};
  GatingNetwork gate(ps, gc, 12, grng);
  auto e = emb.forward(7);
  for (int b = 0; b < 3; ++b) {
    auto p = gate.probs(b, e);
    for (double v : p.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  auto row = gate.activation_row(e);
  // Lowest-index pair in each block under uniform probabilities.
  std::vector<std::uint8_t> want = {1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0};
  CHECK(row == want);
}

TEST_CASE("gating seed does not change the init-time function") {
  ParamStore ps1, ps2;
  std::mt19937_64 core1(1), core2(1), g1(2), g2(777);
  TimestepEmbedding e1(ps1, "emb", 8, 12, core1), e2(ps2, "emb", 8, 12, core2);
  GateConfig gc{.blocks = 2, .experts = 3, .topk = 2, .renorm = true, .noisy = false};
  GatingNetwork n1(ps1, gc, 12, g1), n2(ps2, gc, 12, g2);
  auto a = n1.probs(1, e1.forward(5)), b = n2.probs(1, e2.forward(5));
  for (int i = 0; i < 3; ++i) CHECK(a.values()[i] == b.values()[i]);
}

TEST_CASE("noisy probs perturb logits with softplus(gain) scale") {
  ParamStore ps;
  std::mt19937_64 core(1), grng(2);
  TimestepEmbedding emb(ps, "emb", 8, 12, core);
  GateConfig gc{.blocks = 1, .experts = 3, .topk = 2, .renorm = true, .noisy = true};
  GatingNetwork gate(ps, gc, 12, grng);
  auto e = emb.forward(4);

  // Two different noise streams give different draws; the same stream state
  // reproduces them.
  std::mt19937_64 r1(9), r2(9), r3(10);
  auto p1 = gate.noisy_probs(0, e, r1);
  auto p2 = gate.noisy_probs(0, e, r2);
  auto p3 = gate.noisy_probs(0, e, r3);
  bool same12 = true, diff13 = false;
  for (int i = 0; i < 3; ++i) {
    same12 = same12 && p1.values()[i] == p2.values()[i];
    diff13 = diff13 || p1.values()[i] != p3.values()[i];
  }
  CHECK(same12);
  CHECK(diff13);

  // Probabilities stay on the simplex.
  double mass = 0.0;
  for (double v : p1.values()) {
    CHECK(v >= 0.0);
    mass += v;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

  // The noise gain is trainable: gradient reaches it through the draw.
  std::mt19937_64 r4(11);
  Tensor pn = gate.noisy_probs(0, e, r4);
  backward(sum(mul(pn, pn)), GradMode::Reset);
  double gsum = 0.0;
  for (double g : gate.noise_gain[0].grad()) gsum += std::fabs(g);
  CHECK(gsum > 0.0);
}

TEST_CASE("activation_row emits k ones per block") {
  ParamStore ps;
  std::mt19937_64 core(5), grng(6);
  TimestepEmbedding emb(ps, "emb", 8, 16, core);
  GateConfig gc{.blocks = 4, .experts = 3, .topk = 2, .renorm = true, .noisy = false};
  GatingNetwork gate(ps, gc, 16, grng);
  // Perturb the heads so selection is nontrivial.
  std::mt19937_64 pert(99);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (auto& w : gate.head_w)
    for (auto& v : w.values_mut()) v = nd(pert);
  auto row = gate.activation_row(emb.forward(9));
  REQUIRE(row.size() == 12);
  for (int b = 0; b < 4; ++b) {
    int ones = 0;
    for (int j = 0; j < 3; ++j) ones += row[b * 3 + j];
    CHECK(ones == 2);
  }
}
