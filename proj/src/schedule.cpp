#include "sdit/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sdit {

namespace {
void check_span_sizes(std::size_t a, std::size_t b, std::size_t c, const char* op) {
  if (a != b || a != c)
    throw std::invalid_argument(std::string(op) + ": span sizes differ");
}
}  // namespace

NoiseSchedule NoiseSchedule::cosine(int T, double s) {
  if (T < 1) throw std::invalid_argument("cosine: T must be >= 1");
  if (s <= 0.0) throw std::invalid_argument("cosine: offset must be > 0");
  auto f = [s](double u) {
    const double arg = (u + s) / (1.0 + s) * std::numbers::pi / 2.0;
    const double c = std::cos(arg);
    return c * c;
  };
  NoiseSchedule ns;
  ns.T = T;
  ns.beta.resize(T);
  ns.alpha.resize(T);
  ns.alpha_bar.resize(T);
  const double f0 = f(0.0);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double cur = f(static_cast<double>(t) / T) / f0;
    double b = 1.0 - cur / prev;
    if (b > 0.999) b = 0.999;
    ns.beta[t - 1] = b;
    prev = cur;
  }
  double run = 1.0;
  for (int t = 1; t <= T; ++t) {
    ns.alpha[t - 1] = 1.0 - ns.beta[t - 1];
    run *= ns.alpha[t - 1];
    ns.alpha_bar[t - 1] = run;
  }
  return ns;
}

void NoiseSchedule::check_t(int t) const {
  if (t < 1 || t > T)
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside 1.." +
                                std::to_string(T));
}

double NoiseSchedule::alpha_bar_before(int t) const {
  check_t(t);
  return t == 1 ? 1.0 : alpha_bar[t - 2];
}

double NoiseSchedule::sigma(int t) const {
  check_t(t);
  if (t == 1) return 0.0;
  const double var =
      beta[t - 1] * (1.0 - alpha_bar_before(t)) / (1.0 - alpha_bar[t - 1]);
  return std::sqrt(var);
}

void q_sample(const NoiseSchedule& ns, std::span<const double> x0,
              std::span<const double> eps, int t, std::span<double> out) {
  ns.check_t(t);
  check_span_sizes(x0.size(), eps.size(), out.size(), "q_sample");
  const double ab = ns.alpha_bar[t - 1];
  const double c0 = std::sqrt(ab);
  const double ce = std::sqrt(1.0 - ab);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c0 * x0[i] + ce * eps[i];
}

void ddpm_step(const NoiseSchedule& ns, std::span<const double> xt,
               std::span<const double> eps_hat, int t,
               std::span<const double> noise, std::span<double> out) {
  ns.check_t(t);
  check_span_sizes(xt.size(), eps_hat.size(), out.size(), "ddpm_step");
  if (t > 1 && noise.size() != xt.size())
    throw std::invalid_argument("ddpm_step: noise span size mismatch");
  const double a = ns.alpha[t - 1];
  const double b = ns.beta[t - 1];
  const double ab = ns.alpha_bar[t - 1];
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  const double coeff = b / std::sqrt(1.0 - ab);
  const double sig = ns.sigma(t);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = inv_sqrt_a * (xt[i] - coeff * eps_hat[i]);
    if (t > 1) out[i] += sig * noise[i];
  }
}

std::vector<int> respaced_steps(int T, int n) {
  if (T < 1 || n < 1 || n > T)
    throw std::invalid_argument("respaced_steps: need 1 <= n <= T, got n=" +
                                std::to_string(n) + " T=" + std::to_string(T));
  if (n == 1) return {T};
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    const double pos = 1.0 + (static_cast<double>(T - 1) * i) / (n - 1);
    out[i] = static_cast<int>(std::llround(pos));
  }
  for (int i = 1; i < n; ++i)
    if (out[i] <= out[i - 1]) throw std::logic_error("respaced_steps: not increasing");
  return out;
}

NoiseSchedule respace(const NoiseSchedule& full, const std::vector<int>& steps) {
  if (steps.empty()) throw std::invalid_argument("respace: empty step list");
  NoiseSchedule ns;
  ns.T = static_cast<int>(steps.size());
  ns.beta.resize(ns.T);
  ns.alpha.resize(ns.T);
  ns.alpha_bar.resize(ns.T);
  double prev = 1.0;
  for (int i = 0; i < ns.T; ++i) {
    full.check_t(steps[i]);
    if (i > 0 && steps[i] <= steps[i - 1])
      throw std::invalid_argument("respace: steps must be strictly increasing");
    const double ab = full.alpha_bar[steps[i] - 1];
    ns.alpha_bar[i] = ab;
    ns.beta[i] = 1.0 - ab / prev;
    ns.alpha[i] = 1.0 - ns.beta[i];
    prev = ab;
  }
  return ns;
}

}  // namespace sdit
