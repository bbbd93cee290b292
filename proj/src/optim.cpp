#include "sdit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sdit/kernels.hpp"

namespace sdit {

AdamW::AdamW(const ParamStore& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  for (const auto& it : params.items()) {
    m_.emplace_back(it.tensor.numel(), 0.0);
    v_.emplace_back(it.tensor.numel(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto& K = kernels::active();
  const auto& items = params_->items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor t = items[i].tensor;
    auto g = t.grad();
    if (g.empty())
      throw std::logic_error("adam: missing gradient for " + items[i].name +
                             " (zero_grad before backward)");
    K.adam_step(t.values_mut().data(), m_[i].data(), v_[i].data(), g.data(),
                g.size(), cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, bias1, bias2,
                cfg_.weight_decay);
  }
}

EmaState::EmaState(const ParamStore& params) : params_(&params) {
  for (const auto& it : params.items())
    ema_.emplace_back(it.tensor.values().begin(), it.tensor.values().end());
}

void EmaState::update(double decay) {
  if (decay < 0.0 || decay > 1.0)
    throw std::invalid_argument("ema: decay must be in [0, 1]");
  const auto& K = kernels::active();
  const auto& items = params_->items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto vals = items[i].tensor.values();
    K.axpby(1.0 - decay, vals.data(), decay, ema_[i].data(), vals.size());
  }
}

void EmaState::swap_with_params() {
  const auto& items = params_->items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor t = items[i].tensor;
    auto vals = t.values_mut();
    std::swap_ranges(vals.begin(), vals.end(), ema_[i].begin());
  }
}

}  // namespace sdit
