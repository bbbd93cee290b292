#pragma once

#include <functional>
#include <span>

#include "sdit/tensor.hpp"

namespace sdit {

// Elementwise ops accept equal shapes or a single-element tensor on either
// side (scalar broadcast). Mismatches raise std::invalid_argument naming the
// op and both shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& a);                // rank 2
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, int dim);
Tensor slice(const Tensor& a, int dim, std::int64_t start, std::int64_t len);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor softmax(const Tensor& a);  // last dim, rank 1 or 2
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-12);
Tensor silu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // [r,c] + [c]
Tensor mul_rowvec(const Tensor& x, const Tensor& v);  // [r,c] * [c]
// x [n,in] (or [in]) with w [in,out], b [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// out[perm[i]] = x[i]; perm must be a permutation of 0..n-1.
Tensor permute(const Tensor& x, std::span<const int> perm);
// Gather: out[i] = x[idx[i]]; backward scatter-adds.
Tensor reindex(const Tensor& x, std::vector<std::int64_t> idx, Shape out_shape);

// Jensen-Shannon divergence (natural log) of two distributions given as
// equal-shape nonnegative tensors; inputs are used as-is (no renormalizing),
// 0*log(0) terms drop out. Gradient w.r.t. a zero entry is defined as zero.
Tensor jsd_core(const Tensor& p, const Tensor& q);

// Max relative error between reverse-mode and central-difference gradients
// of scalar-valued f w.r.t. the leaf `param`. f must be deterministic; eps is
// validated to [1e-7, 1e-3]. Non-finite values raise std::runtime_error.
double grad_check(const std::function<Tensor()>& f, Tensor param, double eps);

}  // namespace sdit
