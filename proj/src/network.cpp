#include "sdit/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sdit/ops.hpp"

namespace sdit {

void ModelConfig::validate() const {
  if (blocks < 1) throw std::invalid_argument("model: blocks must be >= 1");
  if (dim < 1 || heads < 1 || dim % heads != 0)
    throw std::invalid_argument("model: dim must be divisible by heads");
  if (topk < 1 || topk > experts)
    throw std::invalid_argument("model: need 1 <= topk <= experts");
  if (image < 1 || patch < 1 || image % patch != 0)
    throw std::invalid_argument("model: patch must divide image");
  if (timesteps < 1) throw std::invalid_argument("model: timesteps must be >= 1");
  if (classes < 0) throw std::invalid_argument("model: classes must be >= 0");
  if (raw_embed < 2 || raw_embed % 2 != 0)
    throw std::invalid_argument("model: raw_embed must be even and >= 2");
}

namespace {
Tensor init_normal(ParamStore& ps, const std::string& name, Shape shape,
                   std::mt19937_64& rng, double std_dev = 0.02) {
  return ps.add(name, scale(Tensor::randn(std::move(shape), rng), std_dev));
}
}  // namespace

Model::Model(const ModelConfig& cfg_, ModelSeeds seeds) : cfg(cfg_) {
  cfg.validate();
  std::mt19937_64 core_rng(seeds.core);
  std::mt19937_64 gating_rng(seeds.gating);
  std::mt19937_64 expert_rng(seeds.experts);

  const int d = cfg.dim;
  const int pp = cfg.patch * cfg.patch;
  const int L = cfg.tokens();

  patch_w = init_normal(params, "patch.w", {pp, d}, core_rng);
  patch_b = params.add("patch.b", Tensor::zeros({d}));
  pos_embed = init_normal(params, "pos", {L, d}, core_rng);
  if (cfg.classes > 0)
    label_table = init_normal(params, "label.table", {cfg.classes + 1, d}, core_rng);

  embed = TimestepEmbedding(params, "embed", cfg.raw_embed, d, core_rng);

  for (int i = 0; i < cfg.blocks; ++i) {
    const std::string p = "block" + std::to_string(i);
    BlockParams b;
    b.wqkv = init_normal(params, p + ".wqkv", {d, 3 * d}, core_rng);
    b.bqkv = params.add(p + ".bqkv", Tensor::zeros({3 * d}));
    b.wproj = init_normal(params, p + ".wproj", {d, d}, core_rng);
    b.bproj = params.add(p + ".bproj", Tensor::zeros({d}));
    b.wff1 = init_normal(params, p + ".wff1", {d, 4 * d}, core_rng);
    b.bff1 = params.add(p + ".bff1", Tensor::zeros({4 * d}));
    b.wff2 = init_normal(params, p + ".wff2", {4 * d, d}, core_rng);
    b.bff2 = params.add(p + ".bff2", Tensor::zeros({d}));
    // adaLN-zero: modulation starts at identity (shift/scale/gates all 0)
    b.wmod = params.add(p + ".wmod", Tensor::zeros({d, 6 * d}));
    b.bmod = params.add(p + ".bmod", Tensor::zeros({6 * d}));
    blocks.push_back(std::move(b));
  }

  final_mod_w = params.add("final.wmod", Tensor::zeros({d, 2 * d}));
  final_mod_b = params.add("final.bmod", Tensor::zeros({2 * d}));
  head_w = params.add("head.w", Tensor::zeros({d, pp}));
  head_b = params.add("head.b", Tensor::zeros({pp}));

  if (cfg.smoe) {
    GateConfig gc;
    gc.blocks = cfg.blocks;
    gc.experts = cfg.experts;
    gc.topk = cfg.topk;
    gc.renorm = cfg.gate_renorm;
    gc.noisy = cfg.noisy_gating;
    gating = GatingNetwork(params, gc, d, gating_rng);
    for (int i = 0; i < cfg.blocks; ++i)
      banks.emplace_back(params, "block" + std::to_string(i) + ".smoe", d, 2 * d,
                         cfg.experts, cfg.integration, expert_rng);
  }

  // patch/unpatch element maps
  const int S = cfg.image, P = cfg.patch, G = S / P;
  patch_idx_.resize(static_cast<std::size_t>(L) * pp);
  unpatch_idx_.resize(static_cast<std::size_t>(S) * S);
  for (int gy = 0; gy < G; ++gy)
    for (int gx = 0; gx < G; ++gx)
      for (int py = 0; py < P; ++py)
        for (int px = 0; px < P; ++px) {
          const std::int64_t tok = (gy * G + gx) * pp + py * P + px;
          const std::int64_t pix = (gy * P + py) * S + gx * P + px;
          patch_idx_[tok] = pix;
          unpatch_idx_[pix] = tok;
        }

  ln_gamma_ = Tensor::full({d}, 1.0);
  ln_beta_ = Tensor::zeros({d});
}

Tensor Model::condition(int t, int label) const {
  Tensor e = embed.forward(t);
  if (cfg.classes == 0) {
    if (label >= 0)
      throw std::invalid_argument("label given for an unconditional model");
    return e;
  }
  if (label < -1 || label >= cfg.classes)
    throw std::invalid_argument("label " + std::to_string(label) + " outside -1.." +
                                std::to_string(cfg.classes - 1));
  const int row = label < 0 ? cfg.classes : label;  // last row = null embedding
  Tensor y = reshape(slice(label_table, 0, row, 1), {cfg.dim});
  return add(e, y);
}

Tensor Model::attention(const BlockParams& blk, const Tensor& x) const {
  const int d = cfg.dim;
  const int dh = d / cfg.heads;
  Tensor qkv = linear(x, blk.wqkv, blk.bqkv);  // [L, 3d]
  std::vector<Tensor> heads_out;
  for (int h = 0; h < cfg.heads; ++h) {
    Tensor q = slice(qkv, 1, h * dh, dh);
    Tensor k = slice(qkv, 1, d + h * dh, dh);
    Tensor v = slice(qkv, 1, 2 * d + h * dh, dh);
    Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(dh));
    heads_out.push_back(matmul(softmax(scores), v));
  }
  Tensor merged = concat(heads_out, 1);  // [L, d]
  return linear(merged, blk.wproj, blk.bproj);
}

namespace {
// x * (1 + scale) + shift, rows modulated by rank-1 vectors
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& sc) {
  Tensor one = Tensor::full(sc.shape(), 1.0);
  return add_rowvec(mul_rowvec(x, add(sc, one)), shift);
}
}  // namespace

Tensor Model::run_tokens(const Tensor& x, int t, int label, GateState* gs,
                         std::mt19937_64* noise_rng) const {
  if (x.rank() != 2 || x.dim(0) != cfg.image || x.dim(1) != cfg.image)
    throw std::invalid_argument("predict_noise: input " + shape_str(x.shape()) +
                                " for image size " + std::to_string(cfg.image));
  if (t < 1 || t > cfg.timesteps)
    throw std::invalid_argument("predict_noise: t=" + std::to_string(t) +
                                " outside 1.." + std::to_string(cfg.timesteps));
  const int d = cfg.dim;
  const int pp = cfg.patch * cfg.patch;
  const int L = cfg.tokens();

  Tensor patches = reindex(reshape(x, {cfg.image * cfg.image}), patch_idx_, {L, pp});
  Tensor tok = add(linear(patches, patch_w, patch_b), pos_embed);
  Tensor e = embed.forward(t);
  Tensor c;
  {
    // condition() recomputes the embedding; reuse e here
    if (cfg.classes == 0) {
      if (label >= 0)
        throw std::invalid_argument("label given for an unconditional model");
      c = e;
    } else {
      if (label < -1 || label >= cfg.classes)
        throw std::invalid_argument("label " + std::to_string(label) +
                                    " outside -1.." + std::to_string(cfg.classes - 1));
      const int row = label < 0 ? cfg.classes : label;
      c = add(e, reshape(slice(label_table, 0, row, 1), {d}));
    }
  }

  if (gs) {
    gs->p.clear();
    gs->g.clear();
    gs->selected.clear();
    gs->w_gate.assign(static_cast<std::size_t>(cfg.blocks) * cfg.experts, 0);
  }

  for (int i = 0; i < cfg.blocks; ++i) {
    const BlockParams& blk = blocks[i];
    Tensor u = tok;
    Tensor skip;
    if (cfg.smoe) {
      Tensor p = (cfg.noisy_gating && noise_rng)
                     ? gating.noisy_probs(i, e, *noise_rng)
                     : gating.probs(i, e);
      TopkSelection sel = topk_select(p, cfg.topk, cfg.gate_renorm);
      Tensor m = smoe_forward(banks[i], tok, sel.gate, sel.indices);
      Integrated integ = integrate(cfg.integration, tok, m);
      u = integ.block_input;
      skip = integ.skip;
      if (gs) {
        gs->p.push_back(p);
        gs->g.push_back(sel.gate);
        gs->selected.push_back(sel.indices);
        for (int idx : sel.indices)
          gs->w_gate[static_cast<std::size_t>(i) * cfg.experts + idx] = 1;
      }
    }
    Tensor mod = linear(silu(c), blk.wmod, blk.bmod);  // [6d]
    Tensor sh1 = slice(mod, 0, 0, d), sc1 = slice(mod, 0, d, d);
    Tensor g1 = slice(mod, 0, 2 * d, d), sh2 = slice(mod, 0, 3 * d, d);
    Tensor sc2 = slice(mod, 0, 4 * d, d), g2 = slice(mod, 0, 5 * d, d);

    Tensor a = attention(blk, modulate(layer_norm(u, ln_gamma_, ln_beta_, cfg.ln_eps),
                                       sh1, sc1));
    Tensor h = add(u, mul_rowvec(a, g1));
    Tensor f = linear(silu(linear(modulate(layer_norm(h, ln_gamma_, ln_beta_, cfg.ln_eps),
                                           sh2, sc2),
                                  blk.wff1, blk.bff1)),
                      blk.wff2, blk.bff2);
    Tensor h2 = add(h, mul_rowvec(f, g2));
    tok = skip.defined() ? add(h2, skip) : h2;
  }

  if (gs && cfg.smoe) gs->p_tot = concat(gs->p, 0);
  return tok;
}

Tensor Model::predict_noise(const Tensor& x, int t, int label, GateState* gs,
                            std::mt19937_64* noise_rng) const {
  const int d = cfg.dim;
  const int pp = cfg.patch * cfg.patch;
  const int L = cfg.tokens();
  Tensor tok = run_tokens(x, t, label, gs, noise_rng);
  Tensor c = condition(t, label);
  Tensor mod = linear(silu(c), final_mod_w, final_mod_b);  // [2d]
  Tensor sh = slice(mod, 0, 0, d), sc = slice(mod, 0, d, d);
  Tensor out = linear(modulate(layer_norm(tok, ln_gamma_, ln_beta_, cfg.ln_eps), sh, sc),
                      head_w, head_b);  // [L, pp]
  return reindex(reshape(out, {static_cast<std::int64_t>(L) * pp}), unpatch_idx_,
                 {cfg.image, cfg.image});
}

Tensor Model::forward_tokens(const Tensor& x, int t, int label) const {
  return run_tokens(x, t, label, nullptr, nullptr);
}

std::vector<std::uint8_t> Model::gate_row(int t) const {
  if (!cfg.smoe) throw std::logic_error("gate_row: smoe disabled");
  NoGradGuard ng;
  return gating.activation_row(embed.forward(t));
}

std::vector<std::uint8_t> Model::gate_map() const {
  std::vector<std::uint8_t> map;
  map.reserve(static_cast<std::size_t>(cfg.timesteps) * cfg.blocks * cfg.experts);
  for (int t = 1; t <= cfg.timesteps; ++t) {
    auto row = gate_row(t);
    map.insert(map.end(), row.begin(), row.end());
  }
  return map;
}

long Model::expert_evals_and_reset() const {
  long s = 0;
  for (const auto& b : banks) {
    s += b.total_evals();
    b.reset_evals();
  }
  return s;
}

std::vector<long> Model::expert_eval_counts() const {
  std::vector<long> out;
  for (const auto& b : banks)
    out.insert(out.end(), b.eval_count.begin(), b.eval_count.end());
  return out;
}

}  // namespace sdit
