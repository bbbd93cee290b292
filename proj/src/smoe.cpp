#include "sdit/smoe.hpp"

#include <stdexcept>

#include "sdit/ops.hpp"

namespace sdit {

IntegrationMode integration_from_string(const std::string& s) {
  if (s == "direct") return IntegrationMode::Direct;
  if (s == "mask") return IntegrationMode::Mask;
  if (s == "mask_skip") return IntegrationMode::MaskSkip;
  if (s == "mask_skip_init") return IntegrationMode::MaskSkipInit;
  throw std::invalid_argument("unknown integration mode: " + s);
}

const char* to_string(IntegrationMode m) {
  switch (m) {
    case IntegrationMode::Direct: return "direct";
    case IntegrationMode::Mask: return "mask";
    case IntegrationMode::MaskSkip: return "mask_skip";
    default: return "mask_skip_init";
  }
}

ExpertBank::ExpertBank(ParamStore& ps, const std::string& prefix, int dim_,
                       int hidden_, int count, IntegrationMode mode,
                       std::mt19937_64& rng)
    : dim(dim_), hidden(hidden_) {
  if (count < 1) throw std::invalid_argument("expert bank: count must be >= 1");
  const bool identity = mode == IntegrationMode::MaskSkipInit;
  for (int j = 0; j < count; ++j) {
    const std::string p = prefix + ".expert" + std::to_string(j);
    Expert e;
    e.w1 = ps.add(p + ".w1", scale(Tensor::randn({dim, hidden}, rng), 0.02));
    e.b1 = ps.add(p + ".b1", Tensor::zeros({hidden}));
    if (identity) {
      e.w2 = ps.add(p + ".w2", Tensor::zeros({hidden, dim}));
      e.offset = ps.add(p + ".offset", Tensor::full({dim}, 1.0));
    } else {
      e.w2 = ps.add(p + ".w2", scale(Tensor::randn({hidden, dim}, rng), 0.02));
      e.offset = ps.add(p + ".offset", Tensor::zeros({dim}));
    }
    e.b2 = ps.add(p + ".b2", Tensor::zeros({dim}));
    experts.push_back(std::move(e));
  }
  eval_count.assign(count, 0);
}

Tensor ExpertBank::forward_expert(int j, const Tensor& z) const {
  const Expert& e = experts.at(j);
  ++eval_count[j];
  Tensor h = silu(add_rowvec(matmul(z, e.w1), e.b1));
  return add_rowvec(add_rowvec(matmul(h, e.w2), e.b2), e.offset);
}

long ExpertBank::total_evals() const {
  long s = 0;
  for (long c : eval_count) s += c;
  return s;
}

void ExpertBank::reset_evals() const {
  for (auto& c : eval_count) c = 0;
}

Tensor smoe_forward(const ExpertBank& bank, const Tensor& z, const Tensor& gate,
                    std::span<const int> active) {
  if (z.rank() != 2 || z.dim(1) != bank.dim)
    throw std::invalid_argument("smoe_forward: tokens " + shape_str(z.shape()) +
                                " for dim " + std::to_string(bank.dim));
  if (gate.rank() != 1 ||
      gate.numel() != static_cast<std::int64_t>(bank.experts.size()))
    throw std::invalid_argument("smoe_forward: gate " + shape_str(gate.shape()));
  if (active.empty()) throw std::invalid_argument("smoe_forward: empty selection");
  Tensor m;
  for (int j : active) {
    if (j < 0 || j >= static_cast<int>(bank.experts.size()))
      throw std::out_of_range("smoe_forward: expert index " + std::to_string(j));
    Tensor gj = slice(gate, 0, j, 1);  // scalar gate, keeps the grad path
    Tensor term = mul(bank.forward_expert(j, z), gj);
    m = m.defined() ? add(m, term) : term;
  }
  return m;
}

Integrated integrate(IntegrationMode mode, const Tensor& z, const Tensor& m) {
  Integrated out;
  switch (mode) {
    case IntegrationMode::Direct:
      out.block_input = m;
      break;
    case IntegrationMode::Mask:
      out.block_input = mul(z, m);
      break;
    case IntegrationMode::MaskSkip:
    case IntegrationMode::MaskSkipInit:
      out.block_input = mul(z, m);
      out.skip = mul(z, sub(Tensor::full(m.shape(), 1.0), m));
      break;
  }
  return out;
}

}  // namespace sdit
