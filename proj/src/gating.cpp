#include "sdit/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sdit/ops.hpp"

namespace sdit {

std::vector<double> sinusoidal_features(int t, int dim, double max_period) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("sinusoidal_features: dim must be even and >= 2");
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(max_period) * i / half);
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
  return out;
}

TimestepEmbedding::TimestepEmbedding(ParamStore& ps, const std::string& prefix,
                                     int in_dim_, int out_dim_, std::mt19937_64& rng)
    : in_dim(in_dim_), out_dim(out_dim_) {
  w1 = ps.add(prefix + ".w1", scale(Tensor::randn({in_dim, out_dim}, rng), 0.02));
  b1 = ps.add(prefix + ".b1", Tensor::zeros({out_dim}));
  w2 = ps.add(prefix + ".w2", scale(Tensor::randn({out_dim, out_dim}, rng), 0.02));
  b2 = ps.add(prefix + ".b2", Tensor::zeros({out_dim}));
}

Tensor TimestepEmbedding::forward(int t) const {
  Tensor feats = Tensor::from(sinusoidal_features(t, in_dim), {in_dim});
  return linear(silu(linear(feats, w1, b1)), w2, b2);
}

TopkSelection topk_select(const Tensor& p, int k, bool renorm) {
  if (p.rank() != 1)
    throw std::invalid_argument("topk_select: need rank 1, got " + shape_str(p.shape()));
  const int m = static_cast<int>(p.numel());
  if (k < 1 || k > m)
    throw std::invalid_argument("topk_select: k=" + std::to_string(k) + " for " +
                                std::to_string(m) + " entries");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return p.at(a) > p.at(b);  // stable: equal values keep index order
  });
  TopkSelection sel;
  sel.indices.assign(order.begin(), order.begin() + k);
  std::sort(sel.indices.begin(), sel.indices.end());
  std::vector<double> mask(m, 0.0);
  for (int idx : sel.indices) mask[idx] = 1.0;
  Tensor masked = mul(p, Tensor::from(std::move(mask), {m}));
  if (renorm) {
    Tensor mass = sum(masked);
    if (!(mass.item() > 0.0))
      throw std::runtime_error("topk_select: selected mass is not positive");
    sel.gate = div(masked, mass);
  } else {
    sel.gate = masked;
  }
  return sel;
}

GatingNetwork::GatingNetwork(ParamStore& ps, GateConfig cfg_, int model_dim,
                             std::mt19937_64& rng)
    : cfg(cfg_) {
  (void)rng;  // heads start at zero; stream reserved for non-degenerate inits
  if (cfg.blocks < 1) throw std::invalid_argument("gating: blocks must be >= 1");
  if (cfg.topk < 1 || cfg.topk > cfg.experts)
    throw std::invalid_argument("gating: need 1 <= topk <= experts");
  for (int i = 0; i < cfg.blocks; ++i) {
    const std::string prefix = "gating.head" + std::to_string(i);
    head_w.push_back(ps.add(prefix + ".w", Tensor::zeros({model_dim, cfg.experts})));
    head_b.push_back(ps.add(prefix + ".b", Tensor::zeros({cfg.experts})));
    noise_gain.push_back(ps.add(prefix + ".noise", Tensor::zeros({cfg.experts})));
  }
}

Tensor GatingNetwork::logits(int block, const Tensor& e) const {
  return linear(e, head_w.at(block), head_b.at(block));
}

Tensor GatingNetwork::probs(int block, const Tensor& e) const {
  return softmax(logits(block, e));
}

Tensor GatingNetwork::noisy_probs(int block, const Tensor& e,
                                  std::mt19937_64& rng) const {
  Tensor z = Tensor::randn({cfg.experts}, rng);
  Tensor noise = mul(z, softplus(noise_gain.at(block)));
  return softmax(add(logits(block, e), noise));
}

std::vector<std::uint8_t> GatingNetwork::activation_row(const Tensor& e) const {
  NoGradGuard ng;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(cfg.blocks) * cfg.experts, 0);
  for (int i = 0; i < cfg.blocks; ++i) {
    TopkSelection sel = topk_select(probs(i, e), cfg.topk, false);
    for (int idx : sel.indices)
      row[static_cast<std::size_t>(i) * cfg.experts + idx] = 1;
  }
  return row;
}

}  // namespace sdit
