#pragma once

#include <vector>

#include "sdit/params.hpp"

namespace sdit {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam over a ParamStore (in registration order).
class AdamW {
 public:
  AdamW(const ParamStore& params, AdamConfig cfg);
  void step();
  long steps_taken() const { return t_; }

  // checkpoint access
  std::vector<std::vector<double>>& m() { return m_; }
  std::vector<std::vector<double>>& v() { return v_; }
  const std::vector<std::vector<double>>& m() const { return m_; }
  const std::vector<std::vector<double>>& v() const { return v_; }
  void set_steps_taken(long t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  const ParamStore* params_;
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Shadow copy of the parameters updated as ema = decay*ema + (1-decay)*param.
class EmaState {
 public:
  explicit EmaState(const ParamStore& params);
  void update(double decay);
  std::vector<std::vector<double>>& buffers() { return ema_; }
  const std::vector<std::vector<double>>& buffers() const { return ema_; }
  void swap_with_params();  // exchange live weights and the shadow copy

 private:
  const ParamStore* params_;
  std::vector<std::vector<double>> ema_;
};

// Evaluates under the EMA weights for the scope's lifetime.
struct EmaScope {
  EmaState& state;
  explicit EmaScope(EmaState& s) : state(s) { state.swap_with_params(); }
  ~EmaScope() { state.swap_with_params(); }
  EmaScope(const EmaScope&) = delete;
  EmaScope& operator=(const EmaScope&) = delete;
};

}  // namespace sdit
