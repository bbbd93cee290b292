#include "sdit/sampler.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "sdit/ops.hpp"

namespace sdit {

std::vector<std::vector<double>> sample_images(const Model& model,
                                               const NoiseSchedule& full,
                                               const SampleConfig& sc) {
  if (sc.count < 1) throw std::invalid_argument("sample: count must be >= 1");
  if (sc.steps < 1 || sc.steps > full.T)
    throw std::invalid_argument("sample: steps must be in [1, " +
                                std::to_string(full.T) + "]");
  if (sc.guidance < 1.0)
    throw std::invalid_argument("sample: guidance must be >= 1 (1 disables)");
  if (sc.label >= 0 && model.cfg.classes == 0)
    throw std::invalid_argument("sample: label given for an unconditional model");
  if (sc.label >= model.cfg.classes)
    throw std::invalid_argument("sample: label " + std::to_string(sc.label) +
                                " out of range for " +
                                std::to_string(model.cfg.classes) + " classes");

  const std::vector<int> steps = respaced_steps(full.T, sc.steps);
  const NoiseSchedule ns = respace(full, steps);
  const int side = model.cfg.image;
  const std::size_t n = static_cast<std::size_t>(side) * side;
  const bool guided = sc.guidance != 1.0 && sc.label >= 0;

  NoGradGuard ng;
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out;
  out.reserve(sc.count);
  std::vector<double> x(n), next(n), noise(n), eps(n);
  for (int img = 0; img < sc.count; ++img) {
    for (auto& v : x) v = normal(rng);
    for (int i = sc.steps; i >= 1; --i) {
      const int t_orig = steps[i - 1];
      Tensor xt = Tensor::from(x, {side, side});
      if (guided) {
        Tensor e_null = model.predict_noise(xt, t_orig, -1);
        Tensor e_lab = model.predict_noise(xt, t_orig, sc.label);
        for (std::size_t j = 0; j < n; ++j)
          eps[j] = e_null.values()[j] +
                   sc.guidance * (e_lab.values()[j] - e_null.values()[j]);
      } else {
        Tensor e = model.predict_noise(xt, t_orig, sc.label);
        std::copy(e.values().begin(), e.values().end(), eps.begin());
      }
      if (i > 1)
        for (auto& v : noise) v = normal(rng);
      ddpm_step(ns, x, eps, i, noise, next);
      x.swap(next);
    }
    for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
    out.push_back(x);
  }
  return out;
}

}  // namespace sdit
