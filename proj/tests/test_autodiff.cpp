#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "sdit/ops.hpp"
#include "sdit/tensor.hpp"

using namespace sdit;

TEST_CASE("forward composite matches hand-computed value") {
  // y = mean((x + x) * 3)  with x = [1, 2, 3]  ->  mean([6, 12, 18]) = 12
  Tensor x = Tensor::from({1, 2, 3}, {3});
  Tensor y = mean(scale(add(x, x), 3.0));
  CHECK(y.item() == doctest::Approx(12.0).epsilon(1e-15));
}

TEST_CASE("d/dx (x + x) = 2") {
  Tensor x = Tensor::from({1.5, -2.0}, {2}).set_requires_grad(true);
  Tensor loss = sum(add(x, x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("graph trace is topologically ordered and duplicate-free") {
  std::mt19937_64 rng(1);
  Tensor x = Tensor::randn({4, 4}, rng).set_requires_grad(true);
  Tensor y = matmul(x, transpose(x));
  Tensor loss = mean(silu(add(y, y)));
  Graph g = Graph::trace(loss);
  CHECK(g.nodes.size() >= 6);
  std::set<const Tensor::Impl*> seen;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    CHECK(seen.insert(g.nodes[i]).second);  // visited once
    for (const auto& parent : g.nodes[i]->parents)
      CHECK(parent->id < g.nodes[i]->id);  // inputs precede outputs
    if (i) CHECK(g.nodes[i - 1]->id < g.nodes[i]->id);
  }
}

TEST_CASE("backward repeated: reset vs accumulate") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}).set_requires_grad(true);
  Tensor loss = sum(mul(x, x));  // grad = 2x
  backward(loss, GradMode::Reset);
  std::vector<double> once(x.grad().begin(), x.grad().end());
  backward(loss, GradMode::Reset);
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == once);
  backward(loss, GradMode::Accumulate);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * once[0]));
  CHECK(x.grad()[1] == doctest::Approx(2.0 * once[1]));
}

TEST_CASE("disconnected leaf keeps zero gradient") {
  Tensor x = Tensor::from({1.0}, {1}).set_requires_grad(true);
  Tensor z = Tensor::from({5.0}, {1}).set_requires_grad(true);
  z.zero_grad();
  backward(sum(mul(x, x)));
  REQUIRE(z.grad().size() == 1);
  CHECK(z.grad()[0] == 0.0);
}

TEST_CASE("backward requires scalar loss") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}).set_requires_grad(true);
  CHECK_THROWS_AS(backward(add(x, x)), std::invalid_argument);
}

TEST_CASE("shape mismatch names op and shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 3});
  try {
    add(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[3, 3]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), std::invalid_argument);
}

TEST_CASE("no-grad guard yields untracked results") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}).set_requires_grad(true);
  NoGradGuard ng;
  Tensor y = mul(x, x);
  CHECK(y.is_leaf());
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("set_requires_grad rejected on interior nodes") {
  Tensor x = Tensor::from({1.0}, {1}).set_requires_grad(true);
  Tensor y = add(x, x);
  CHECK_THROWS_AS(y.set_requires_grad(true), std::logic_error);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(2);
  Tensor x = Tensor::randn({7, 5}, rng);
  Tensor y = softmax(x);
  for (int r = 0; r < 7; ++r) {
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += y.at(r * 5 + c);
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("layer_norm rows have zero mean, unit variance") {
  std::mt19937_64 rng(3);
  Tensor x = Tensor::randn({6, 32}, rng);
  Tensor y = layer_norm(x, Tensor::full({32}, 1.0), Tensor::zeros({32}));
  for (int r = 0; r < 6; ++r) {
    double m = 0.0, v = 0.0;
    for (int c = 0; c < 32; ++c) m += y.at(r * 32 + c);
    m /= 32;
    for (int c = 0; c < 32; ++c) {
      const double d = y.at(r * 32 + c) - m;
      v += d * d;
    }
    v /= 32;
    CHECK(std::fabs(m) < 1e-12);
    CHECK(std::fabs(v - 1.0) < 1e-9);
  }
}

TEST_CASE("gradient of matmul-add-silu-mean composite matches finite differences") {
  std::mt19937_64 rng(4);
  Tensor x = Tensor::randn({3, 5}, rng).set_requires_grad(true);
  Tensor w = Tensor::randn({5, 4}, rng).set_requires_grad(true);
  Tensor b = Tensor::randn({4}, rng).set_requires_grad(true);
  auto f = [&]() { return mean(silu(add_rowvec(matmul(x, w), b))); };
  CHECK(grad_check(f, x, 1e-5) < 1e-6);
  CHECK(grad_check(f, w, 1e-5) < 1e-6);
  CHECK(grad_check(f, b, 1e-5) < 1e-6);
}

TEST_CASE("gradients of the remaining primitives match finite differences") {
  std::mt19937_64 rng(5);
  Tensor x = Tensor::randn({4, 6}, rng).set_requires_grad(true);
  Tensor v = Tensor::randn({6}, rng).set_requires_grad(true);
  Tensor s = Tensor::from({0.7}, {1}).set_requires_grad(true);
  Tensor gamma = Tensor::uniform({6}, rng, 0.5, 1.5).set_requires_grad(true);
  Tensor beta = Tensor::randn({6}, rng).set_requires_grad(true);

  SUBCASE("softmax + slice + concat") {
    auto f = [&]() {
      Tensor sm = softmax(x);
      Tensor a = slice(sm, 1, 0, 2);
      Tensor b = slice(sm, 1, 2, 4);
      Tensor parts[] = {b, a};
      return mean(mul(concat(parts, 1), concat(parts, 1)));
    };
    CHECK(grad_check(f, x, 1e-5) < 1e-6);
  }
  SUBCASE("layer_norm") {
    auto f = [&]() { return mean(mul(layer_norm(x, gamma, beta), x)); };
    CHECK(grad_check(f, x, 1e-5) < 1e-6);
    CHECK(grad_check(f, gamma, 1e-5) < 1e-6);
    CHECK(grad_check(f, beta, 1e-5) < 1e-6);
  }
  SUBCASE("div and scalar broadcast") {
    auto f = [&]() { return mean(div(x, add(mul(s, s), Tensor::scalar(1.0)))); };
    CHECK(grad_check(f, x, 1e-5) < 1e-6);
    CHECK(grad_check(f, s, 1e-5) < 1e-6);
    auto f2 = [&]() { return sum(div(s, add_rowvec(mul(x, x), Tensor::full({6}, 1.0)))); };
    CHECK(grad_check(f2, s, 1e-5) < 1e-6);
    CHECK(grad_check(f2, x, 1e-5) < 1e-6);
  }
  SUBCASE("transpose, reshape, mul_rowvec") {
    auto f = [&]() {
      Tensor t = transpose(x);               // [6,4]
      Tensor r = reshape(t, {4, 6});
      return mean(silu(mul_rowvec(r, v)));
    };
    CHECK(grad_check(f, x, 1e-5) < 1e-6);
    CHECK(grad_check(f, v, 1e-5) < 1e-6);
  }
  SUBCASE("permute and reindex") {
    Tensor p1 = Tensor::randn({6}, rng).set_requires_grad(true);
    const int perm[] = {3, 1, 4, 5, 0, 2};
    auto f = [&]() { return mean(mul(permute(p1, perm), permute(p1, perm))); };
    CHECK(grad_check(f, p1, 1e-5) < 1e-6);
    auto f2 = [&]() {
      return mean(reindex(p1, {5, 5, 0, 1}, {4}));
    };
    CHECK(grad_check(f2, p1, 1e-5) < 1e-6);
  }
}

TEST_CASE("grad_check validates eps and constant functions") {
  Tensor x = Tensor::from({1.0}, {1}).set_requires_grad(true);
  auto f = [&]() { return Tensor::scalar(3.0); };
  CHECK(grad_check(f, x, 1e-5) == 0.0);  // constant: analytic and numeric both zero
  CHECK_THROWS_AS(grad_check(f, x, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(grad_check(f, x, 1e-8), std::invalid_argument);
}

TEST_CASE("jsd of frozen pair matches closed form") {
  // JSD((1,0), (1/2,1/2)) = ln(4/3)/2 + (ln(2/3) + ln 2)/4
  const double expect = 0.21576155433883562;
  Tensor p = Tensor::from({1.0, 0.0}, {2});
  Tensor q = Tensor::from({0.5, 0.5}, {2});
  CHECK(jsd_core(p, q).item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(jsd_core(q, p).item() == doctest::Approx(expect).epsilon(1e-12));  // symmetric
  CHECK(jsd_core(p, p).item() == doctest::Approx(0.0));
  CHECK(jsd_core(p, q).item() <= std::log(2.0));
  Tensor r = Tensor::from({0.0, 1.0}, {2});
  CHECK(jsd_core(p, r).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("jsd gradient matches finite differences through softmax") {
  std::mt19937_64 rng(6);
  Tensor logits = Tensor::randn({5}, rng).set_requires_grad(true);
  Tensor q = Tensor::from({0.4, 0.0, 0.3, 0.3, 0.0}, {5});
  auto f = [&]() { return jsd_core(softmax(logits), q); };
  CHECK(grad_check(f, logits, 1e-5) < 1e-6);
}

TEST_CASE("jsd rejects negative entries") {
  Tensor p = Tensor::from({1.2, -0.2}, {2});
  Tensor q = Tensor::from({0.5, 0.5}, {2});
  CHECK_THROWS_AS(jsd_core(p, q), std::invalid_argument);
}
