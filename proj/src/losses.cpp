#include "sdit/losses.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sdit {

Tensor jsd(const Tensor& p, const Tensor& q) {
  Tensor ps = sum(p);
  Tensor qs = sum(q);
  if (!(ps.item() > 0.0) || !(qs.item() > 0.0))
    throw std::invalid_argument("jsd: inputs must have positive mass");
  return jsd_core(div(p, ps), div(q, qs));
}

Tensor diffusion_prior_loss(const Tensor& p_tot, std::span<const int> pi,
                            std::span<const std::uint8_t> prior_row) {
  if (p_tot.rank() != 1)
    throw std::invalid_argument("diffusion_prior_loss: p_tot must be rank 1, got " +
                                shape_str(p_tot.shape()));
  const std::size_t n = static_cast<std::size_t>(p_tot.numel());
  if (pi.size() != n || prior_row.size() != n)
    throw std::invalid_argument("diffusion_prior_loss: length mismatch (" +
                                std::to_string(n) + ", " + std::to_string(pi.size()) +
                                ", " + std::to_string(prior_row.size()) + ")");
  std::vector<double> prior(n);
  for (std::size_t i = 0; i < n; ++i) prior[i] = static_cast<double>(prior_row[i]);
  Tensor aligned = permute(p_tot, pi);
  Tensor target = Tensor::from(std::move(prior), {static_cast<std::int64_t>(n)});
  return jsd(aligned, target);
}

Tensor total_loss(const Tensor& noise_loss, const Tensor& dp_loss, double lambda_dp) {
  return add(noise_loss, scale(dp_loss, lambda_dp));
}

Tensor load_balance_loss(std::span<const Tensor> importance) {
  if (importance.empty())
    throw std::invalid_argument("load_balance_loss: no importance vectors");
  Tensor out;
  for (const Tensor& imp : importance) {
    if (imp.rank() != 1)
      throw std::invalid_argument("load_balance_loss: importance must be rank 1");
    Tensor mu = mean(imp);
    if (!(mu.item() > 0.0))
      throw std::invalid_argument("load_balance_loss: importance must be positive");
    Tensor d = sub(imp, mu);
    Tensor var = mean(mul(d, d));
    Tensor cv2 = div(var, mul(mu, mu));
    out = out.defined() ? add(out, cv2) : cv2;
  }
  return out;
}

}  // namespace sdit
