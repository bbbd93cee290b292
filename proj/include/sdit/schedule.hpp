#pragma once

#include <span>
#include <vector>

namespace sdit {

// Discrete-time diffusion schedule over steps t = 1..T (index t-1 into the
// arrays). alpha_bar[t-1] is the cumulative product after step t; the empty
// product (t = 0) is 1.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  // Squared-cosine cumulative schedule: betas are derived from the ratio of
  // consecutive alpha_bar values, clipped to <= 0.999, then alpha_bar is
  // recomputed as the running product of (1 - beta).
  static NoiseSchedule cosine(int T, double s = 0.008);

  double alpha_bar_before(int t) const;  // alpha_bar_{t-1}, 1 when t == 1
  // Posterior noise std for the ancestral step at t; sigma(1) == 0.
  double sigma(int t) const;
  void check_t(int t) const;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
void q_sample(const NoiseSchedule& ns, std::span<const double> x0,
              std::span<const double> eps, int t, std::span<double> out);

// One ancestral step: x_{t-1} from x_t and the predicted noise.
// `noise` supplies N(0,1) draws; it is ignored at t == 1 (sigma_1 = 0).
void ddpm_step(const NoiseSchedule& ns, std::span<const double> xt,
               std::span<const double> eps_hat, int t,
               std::span<const double> noise, std::span<double> out);

// Uniform-stride subsequence of 1..T with n entries, ascending, endpoints
// included (n == 1 picks T).
std::vector<int> respaced_steps(int T, int n);

// Schedule restricted to an ascending subsequence of timesteps: entry i of
// the result plays the role of timestep i+1, with alpha_bar sampled from the
// full schedule and betas re-derived (no clipping).
NoiseSchedule respace(const NoiseSchedule& full, const std::vector<int>& steps);

}  // namespace sdit
