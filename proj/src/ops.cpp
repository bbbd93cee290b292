#include "sdit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "sdit/kernels.hpp"

namespace sdit {
namespace {

using Impl = Tensor::Impl;
using detail::make_node;
using detail::shape_error;

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

// dst.grad[i] += g[i]
void acc(Impl& dst, std::span<const double> g) {
  dst.ensure_grad();
  kernels::active().axpy(1.0, g.data(), dst.grad.data(), g.size());
}

// dst.grad[i] += g[i] * x[i]
void acc_mul(Impl& dst, const double* g, const double* x, std::size_t n) {
  dst.ensure_grad();
  double* d = dst.grad.data();
  for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * x[i];
}

void transpose_raw(const double* in, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

enum class BinKind { Add, Sub, Mul, Div };

const char* bin_name(BinKind k) {
  switch (k) {
    case BinKind::Add: return "add";
    case BinKind::Sub: return "sub";
    case BinKind::Mul: return "mul";
    default: return "div";
  }
}

Tensor binary(BinKind kind, const Tensor& a, const Tensor& b) {
  const char* name = bin_name(kind);
  const bool sa = a.numel() == 1;
  const bool sb = b.numel() == 1;
  if (!same_shape(a.shape(), b.shape()) && !sa && !sb)
    shape_error(name, a.shape(), b.shape());
  const bool elementwise = same_shape(a.shape(), b.shape());
  const Shape& out_shape = (elementwise || sb) ? a.shape() : b.shape();
  const std::size_t n = static_cast<std::size_t>(shape_numel(out_shape));
  std::vector<double> out(n);
  const auto& K = kernels::active();
  const double* av = a.values().data();
  const double* bv = b.values().data();
  if (elementwise) {
    switch (kind) {
      case BinKind::Add: K.add(av, bv, out.data(), n); break;
      case BinKind::Sub: K.sub(av, bv, out.data(), n); break;
      case BinKind::Mul: K.mul(av, bv, out.data(), n); break;
      case BinKind::Div: K.div(av, bv, out.data(), n); break;
    }
  } else if (sb) {
    const double s = bv[0];
    switch (kind) {
      case BinKind::Add: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + s; break;
      case BinKind::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - s; break;
      case BinKind::Mul: K.scale(av, s, out.data(), n); break;
      case BinKind::Div: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] / s; break;
    }
  } else {  // sa
    const double s = av[0];
    switch (kind) {
      case BinKind::Add: for (std::size_t i = 0; i < n; ++i) out[i] = s + bv[i]; break;
      case BinKind::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = s - bv[i]; break;
      case BinKind::Mul: K.scale(bv, s, out.data(), n); break;
      case BinKind::Div: for (std::size_t i = 0; i < n; ++i) out[i] = s / bv[i]; break;
    }
  }

  Tensor parents[] = {a, b};
  auto backprop = [kind, elementwise, sa, n](Impl& self) {
    Impl& pa = *self.parents[0];
    Impl& pb = *self.parents[1];
    const double* g = self.grad.data();
    const double* av = pa.values.data();
    const double* bv = pb.values.data();
    const bool need_a = pa.requires_grad;
    const bool need_b = pb.requires_grad;
    auto reduce = [g, n](auto&& per_elem) {  // sum_i g[i]*per_elem(i)
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += g[i] * per_elem(i);
      return s;
    };
    switch (kind) {
      case BinKind::Add:
        if (need_a) {
          if (elementwise || !sa) acc(pa, self.grad);
          else { pa.ensure_grad(); pa.grad[0] += reduce([](std::size_t) { return 1.0; }); }
        }
        if (need_b) {
          if (elementwise || sa) acc(pb, self.grad);
          else { pb.ensure_grad(); pb.grad[0] += reduce([](std::size_t) { return 1.0; }); }
        }
        break;
      case BinKind::Sub:
        if (need_a) {
          if (elementwise || !sa) acc(pa, self.grad);
          else { pa.ensure_grad(); pa.grad[0] += reduce([](std::size_t) { return 1.0; }); }
        }
        if (need_b) {
          pb.ensure_grad();
          if (elementwise || sa) {
            double* d = pb.grad.data();
            for (std::size_t i = 0; i < n; ++i) d[i] -= g[i];
          } else {
            pb.grad[0] -= reduce([](std::size_t) { return 1.0; });
          }
        }
        break;
      case BinKind::Mul:
        if (need_a) {
          if (elementwise) acc_mul(pa, g, bv, n);
          else if (sa) { pa.ensure_grad(); pa.grad[0] += reduce([bv](std::size_t i) { return bv[i]; }); }
          else { pa.ensure_grad(); double s = bv[0]; double* d = pa.grad.data();
                 for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * s; }
        }
        if (need_b) {
          if (elementwise) acc_mul(pb, g, av, n);
          else if (sa) { pb.ensure_grad(); double s = av[0]; double* d = pb.grad.data();
                         for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * s; }
          else { pb.ensure_grad(); pb.grad[0] += reduce([av](std::size_t i) { return av[i]; }); }
        }
        break;
      case BinKind::Div:
        if (need_a) {
          pa.ensure_grad();
          if (elementwise) { double* d = pa.grad.data();
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / bv[i]; }
          else if (sa) { pa.grad[0] += reduce([bv](std::size_t i) { return 1.0 / bv[i]; }); }
          else { double s = bv[0]; double* d = pa.grad.data();
                 for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / s; }
        }
        if (need_b) {
          pb.ensure_grad();
          if (elementwise) { double* d = pb.grad.data();
            for (std::size_t i = 0; i < n; ++i) d[i] -= g[i] * av[i] / (bv[i] * bv[i]); }
          else if (sa) { double s = av[0]; double* d = pb.grad.data();
                         for (std::size_t i = 0; i < n; ++i) d[i] -= g[i] * s / (bv[i] * bv[i]); }
          else { pb.grad[0] -= reduce([av, bv](std::size_t i) { return av[i] / (bv[0] * bv[0]); }); }
        }
        break;
    }
  };
  return make_node(name, parents, std::move(out), out_shape, std::move(backprop));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinKind::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(BinKind::Div, a, b); }

Tensor scale(const Tensor& a, double c) {
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<double> out(n);
  kernels::active().scale(a.values().data(), c, out.data(), n);
  Tensor parents[] = {a};
  return make_node("scale", parents, std::move(out), a.shape(), [c](Impl& self) {
    Impl& pa = *self.parents[0];
    pa.ensure_grad();
    kernels::active().axpy(c, self.grad.data(), pa.grad.data(), self.grad.size());
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  kernels::active().matmul(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor parents[] = {a, b};
  return make_node("matmul", parents, std::move(out), {a.dim(0), b.dim(1)},
                   [m, k, n](Impl& self) {
                     Impl& pa = *self.parents[0];
                     Impl& pb = *self.parents[1];
                     const auto& K = kernels::active();
                     const double* g = self.grad.data();
                     if (pa.requires_grad) {  // dA = G * B^T
                       std::vector<double> bt(k * n), tmp(m * k);
                       transpose_raw(pb.values.data(), bt.data(), k, n);
                       K.matmul(g, bt.data(), tmp.data(), m, n, k);
                       pa.ensure_grad();
                       K.axpy(1.0, tmp.data(), pa.grad.data(), m * k);
                     }
                     if (pb.requires_grad) {  // dB = A^T * G
                       std::vector<double> at(m * k), tmp(k * n);
                       transpose_raw(pa.values.data(), at.data(), m, k);
                       K.matmul(at.data(), g, tmp.data(), k, m, n);
                       pb.ensure_grad();
                       K.axpy(1.0, tmp.data(), pb.grad.data(), k * n);
                     }
                   });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) shape_error("transpose", a.shape(), a.shape());
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  transpose_raw(a.values().data(), out.data(), r, c);
  Tensor parents[] = {a};
  return make_node("transpose", parents, std::move(out), {a.dim(1), a.dim(0)},
                   [r, c](Impl& self) {
                     Impl& pa = *self.parents[0];
                     pa.ensure_grad();
                     const double* g = self.grad.data();
                     double* d = pa.grad.data();
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[j * r + i];
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  Tensor parents[] = {a};
  return make_node("reshape", parents, std::move(out), std::move(shape), [](Impl& self) {
    acc(*self.parents[0], self.grad);
  });
}

Tensor concat(std::span<const Tensor> parts, int dim) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const int rank = parts[0].rank();
  if (rank < 1 || rank > 2 || dim < 0 || dim >= rank)
    throw std::invalid_argument("concat: rank " + std::to_string(rank) + ", dim " +
                                std::to_string(dim));
  for (const auto& p : parts) {
    if (p.rank() != rank) shape_error("concat", parts[0].shape(), p.shape());
    for (int d = 0; d < rank; ++d)
      if (d != dim && p.dim(d) != parts[0].dim(d))
        shape_error("concat", parts[0].shape(), p.shape());
  }
  std::int64_t cat = 0;
  for (const auto& p : parts) cat += p.dim(dim);
  Shape out_shape = parts[0].shape();
  out_shape[dim] = cat;
  const std::size_t total = static_cast<std::size_t>(shape_numel(out_shape));
  std::vector<double> out(total);

  std::vector<std::int64_t> widths;  // per-part extent along `dim`
  for (const auto& p : parts) widths.push_back(p.dim(dim));

  if (rank == 1 || dim == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::memcpy(out.data() + off, p.values().data(), p.numel() * sizeof(double));
      off += p.numel();
    }
  } else {  // rank 2, dim 1: interleave rows
    const std::size_t rows = parts[0].dim(0);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t off = r * cat;
      for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        std::memcpy(out.data() + off, p.values().data() + r * w, w * sizeof(double));
        off += w;
      }
    }
  }

  const std::size_t rows = (rank == 2 && dim == 1) ? parts[0].dim(0) : 1;
  auto backprop = [widths, rank, dim, cat, rows](Impl& self) {
    const double* g = self.grad.data();
    if (rank == 1 || dim == 0) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        Impl& p = *self.parents[k];
        if (p.requires_grad) {
          p.ensure_grad();
          kernels::active().axpy(1.0, g + off, p.grad.data(), p.values.size());
        }
        off += p.values.size();
      }
    } else {
      std::size_t col0 = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        Impl& p = *self.parents[k];
        const std::size_t w = static_cast<std::size_t>(widths[k]);
        if (p.requires_grad) {
          p.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j)
              p.grad[r * w + j] += g[r * cat + col0 + j];
        }
        col0 += w;
      }
    }
  };
  return make_node("concat", parts, std::move(out), std::move(out_shape),
                   std::move(backprop));
}

Tensor slice(const Tensor& a, int dim, std::int64_t start, std::int64_t len) {
  const int rank = a.rank();
  if (rank < 1 || rank > 2 || dim < 0 || dim >= rank)
    throw std::invalid_argument("slice: rank " + std::to_string(rank) + ", dim " +
                                std::to_string(dim));
  if (len <= 0 || start < 0 || start + len > a.dim(dim))
    throw std::invalid_argument("slice: [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of " +
                                shape_str(a.shape()) + " dim " + std::to_string(dim));
  Shape out_shape = a.shape();
  out_shape[dim] = len;
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const double* av = a.values().data();
  std::size_t rows = 1, cols = 1;
  if (rank == 2) { rows = a.dim(0); cols = a.dim(1); }
  if (rank == 1) {
    std::memcpy(out.data(), av + start, len * sizeof(double));
  } else if (dim == 0) {
    std::memcpy(out.data(), av + start * cols, len * cols * sizeof(double));
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * len, av + r * cols + start, len * sizeof(double));
  }
  Tensor parents[] = {a};
  auto backprop = [rank, dim, start, len, rows, cols](Impl& self) {
    Impl& p = *self.parents[0];
    p.ensure_grad();
    const double* g = self.grad.data();
    if (rank == 1) {
      kernels::active().axpy(1.0, g, p.grad.data() + start, len);
    } else if (dim == 0) {
      kernels::active().axpy(1.0, g, p.grad.data() + start * cols, len * cols);
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < len; ++j)
          p.grad[r * cols + start + j] += g[r * len + j];
    }
  };
  return make_node("slice", parents, std::move(out), std::move(out_shape),
                   std::move(backprop));
}

Tensor sum(const Tensor& a) {
  double s = kernels::active().sum(a.values().data(), a.numel());
  Tensor parents[] = {a};
  return make_node("sum", parents, {s}, {1}, [](Impl& self) {
    Impl& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0];
    for (auto& d : p.grad) d += g;
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  double s = kernels::active().sum(a.values().data(), a.numel()) / n;
  Tensor parents[] = {a};
  return make_node("mean", parents, {s}, {1}, [n](Impl& self) {
    Impl& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0] / n;
    for (auto& d : p.grad) d += g;
  });
}

Tensor softmax(const Tensor& a) {
  if (a.rank() < 1 || a.rank() > 2) shape_error("softmax", a.shape(), a.shape());
  const std::size_t cols = a.dim(-1);
  const std::size_t rows = static_cast<std::size_t>(a.numel()) / cols;
  std::vector<double> out(a.numel());
  const double* x = a.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = out.data() + r * cols;
    double mx = xr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= z;
  }
  Tensor parents[] = {a};
  return make_node("softmax", parents, std::move(out), a.shape(),
                   [rows, cols](Impl& self) {
                     Impl& p = *self.parents[0];
                     p.ensure_grad();
                     const double* y = self.values.data();
                     const double* g = self.grad.data();
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* yr = y + r * cols;
                       const double* gr = g + r * cols;
                       double dot = 0.0;
                       for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
                       double* d = p.grad.data() + r * cols;
                       for (std::size_t j = 0; j < cols; ++j)
                         d[j] += yr[j] * (gr[j] - dot);
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1 || x.rank() > 2) shape_error("layer_norm", x.shape(), x.shape());
  const std::size_t cols = x.dim(-1);
  const std::size_t rows = static_cast<std::size_t>(x.numel()) / cols;
  if (gamma.rank() != 1 || static_cast<std::size_t>(gamma.dim(0)) != cols)
    shape_error("layer_norm", x.shape(), gamma.shape());
  if (beta.rank() != 1 || static_cast<std::size_t>(beta.dim(0)) != cols)
    shape_error("layer_norm", x.shape(), beta.shape());
  std::vector<double> out(x.numel());
  std::vector<double> mu(rows), inv(rows);
  const double* xv = x.values().data();
  const double* gm = gamma.values().data();
  const double* bt = beta.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv + r * cols;
    double m = 0.0;
    for (std::size_t j = 0; j < cols; ++j) m += xr[j];
    m /= cols;
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - m) * (xr[j] - m);
    var /= cols;
    const double iv = 1.0 / std::sqrt(var + eps);
    mu[r] = m;
    inv[r] = iv;
    double* yr = out.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j)
      yr[j] = (xr[j] - m) * iv * gm[j] + bt[j];
  }
  Tensor parents[] = {x, gamma, beta};
  auto backprop = [rows, cols, mu, inv](Impl& self) {
    Impl& px = *self.parents[0];
    Impl& pg = *self.parents[1];
    Impl& pb = *self.parents[2];
    const double* xv = px.values.data();
    const double* gm = pg.values.data();
    const double* g = self.grad.data();
    if (px.requires_grad) px.ensure_grad();
    if (pg.requires_grad) pg.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    std::vector<double> h(cols), xh(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = xv + r * cols;
      const double* gr = g + r * cols;
      double mh = 0.0, mhx = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        xh[j] = (xr[j] - mu[r]) * inv[r];
        h[j] = gr[j] * gm[j];
        mh += h[j];
        mhx += h[j] * xh[j];
      }
      mh /= cols;
      mhx /= cols;
      if (px.requires_grad) {
        double* d = px.grad.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j)
          d[j] += inv[r] * (h[j] - mh - xh[j] * mhx);
      }
      if (pg.requires_grad)
        for (std::size_t j = 0; j < cols; ++j) pg.grad[j] += gr[j] * xh[j];
      if (pb.requires_grad)
        for (std::size_t j = 0; j < cols; ++j) pb.grad[j] += gr[j];
    }
  };
  return make_node("layer_norm", parents, std::move(out), x.shape(), std::move(backprop));
}

Tensor silu(const Tensor& a) {
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<double> out(n);
  const double* x = a.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[i]));
    out[i] = x[i] * s;
  }
  Tensor parents[] = {a};
  return make_node("silu", parents, std::move(out), a.shape(), [n](Impl& self) {
    Impl& p = *self.parents[0];
    p.ensure_grad();
    const double* x = p.values.data();
    const double* g = self.grad.data();
    double* d = p.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x[i]));
      d[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
    }
  });
}

Tensor softplus(const Tensor& a) {
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<double> out(n);
  const double* x = a.values().data();
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] > 30.0 ? x[i] : std::log1p(std::exp(x[i]));
  Tensor parents[] = {a};
  return make_node("softplus", parents, std::move(out), a.shape(), [n](Impl& self) {
    Impl& p = *self.parents[0];
    p.ensure_grad();
    const double* x = p.values.data();
    const double* g = self.grad.data();
    double* d = p.grad.data();
    for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / (1.0 + std::exp(-x[i]));
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.dim(1) != b.dim(0))
    shape_error("add_rowvec", x.shape(), b.shape());
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(rows * cols);
  const double* xv = x.values().data();
  const double* bv = b.values().data();
  for (std::size_t r = 0; r < rows; ++r)
    kernels::active().add(xv + r * cols, bv, out.data() + r * cols, cols);
  Tensor parents[] = {x, b};
  return make_node("add_rowvec", parents, std::move(out), x.shape(),
                   [rows, cols](Impl& self) {
                     Impl& px = *self.parents[0];
                     Impl& pb = *self.parents[1];
                     const double* g = self.grad.data();
                     if (px.requires_grad) acc(px, self.grad);
                     if (pb.requires_grad) {
                       pb.ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         kernels::active().axpy(1.0, g + r * cols, pb.grad.data(), cols);
                     }
                   });
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.rank() != 1 || x.dim(1) != v.dim(0))
    shape_error("mul_rowvec", x.shape(), v.shape());
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(rows * cols);
  const double* xv = x.values().data();
  const double* vv = v.values().data();
  for (std::size_t r = 0; r < rows; ++r)
    kernels::active().mul(xv + r * cols, vv, out.data() + r * cols, cols);
  Tensor parents[] = {x, v};
  return make_node("mul_rowvec", parents, std::move(out), x.shape(),
                   [rows, cols](Impl& self) {
                     Impl& px = *self.parents[0];
                     Impl& pv = *self.parents[1];
                     const double* g = self.grad.data();
                     const double* xv = px.values.data();
                     const double* vv = pv.values.data();
                     if (px.requires_grad) {
                       px.ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < cols; ++j)
                           px.grad[r * cols + j] += g[r * cols + j] * vv[j];
                     }
                     if (pv.requires_grad) {
                       pv.ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < cols; ++j)
                           pv.grad[j] += g[r * cols + j] * xv[r * cols + j];
                     }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() == 1) {
    Tensor x2 = reshape(x, {1, x.dim(0)});
    Tensor y = add_rowvec(matmul(x2, w), b);
    return reshape(y, {y.dim(1)});
  }
  return add_rowvec(matmul(x, w), b);
}

Tensor permute(const Tensor& x, std::span<const int> perm) {
  const std::size_t n = static_cast<std::size_t>(x.numel());
  if (perm.size() != n)
    throw std::invalid_argument("permute: " + std::to_string(perm.size()) +
                                " indices for " + shape_str(x.shape()));
  std::vector<char> seen(n, 0);
  for (int i : perm) {
    if (i < 0 || static_cast<std::size_t>(i) >= n || seen[i])
      throw std::invalid_argument("permute: not a permutation of 0.." +
                                  std::to_string(n - 1));
    seen[i] = 1;
  }
  std::vector<double> out(n);
  const double* xv = x.values().data();
  for (std::size_t i = 0; i < n; ++i) out[perm[i]] = xv[i];
  std::vector<int> p(perm.begin(), perm.end());
  Tensor parents[] = {x};
  return make_node("permute", parents, std::move(out), x.shape(),
                   [p = std::move(p), n](Impl& self) {
                     Impl& px = *self.parents[0];
                     px.ensure_grad();
                     const double* g = self.grad.data();
                     for (std::size_t i = 0; i < n; ++i) px.grad[i] += g[p[i]];
                   });
}

Tensor reindex(const Tensor& x, std::vector<std::int64_t> idx, Shape out_shape) {
  if (shape_numel(out_shape) != static_cast<std::int64_t>(idx.size()))
    throw std::invalid_argument("reindex: " + std::to_string(idx.size()) +
                                " indices for " + shape_str(out_shape));
  const std::int64_t n = x.numel();
  for (auto i : idx)
    if (i < 0 || i >= n)
      throw std::out_of_range("reindex: index " + std::to_string(i) + " for " +
                              shape_str(x.shape()));
  std::vector<double> out(idx.size());
  const double* xv = x.values().data();
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = xv[idx[i]];
  Tensor parents[] = {x};
  return make_node("reindex", parents, std::move(out), std::move(out_shape),
                   [idx = std::move(idx)](Impl& self) {
                     Impl& px = *self.parents[0];
                     px.ensure_grad();
                     const double* g = self.grad.data();
                     for (std::size_t i = 0; i < idx.size(); ++i)
                       px.grad[idx[i]] += g[i];
                   });
}

Tensor jsd_core(const Tensor& p, const Tensor& q) {
  if (!same_shape(p.shape(), q.shape())) shape_error("jsd", p.shape(), q.shape());
  const std::size_t n = static_cast<std::size_t>(p.numel());
  const double* pv = p.values().data();
  const double* qv = q.values().data();
  double j = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pv[i] < 0.0 || qv[i] < 0.0)
      throw std::invalid_argument("jsd: negative entry at index " + std::to_string(i));
    const double a = 0.5 * (pv[i] + qv[i]);
    if (pv[i] > 0.0) j += 0.5 * pv[i] * std::log(pv[i] / a);
    if (qv[i] > 0.0) j += 0.5 * qv[i] * std::log(qv[i] / a);
  }
  Tensor parents[] = {p, q};
  return make_node("jsd", parents, {j}, {1}, [n](Impl& self) {
    Impl& pp = *self.parents[0];
    Impl& pq = *self.parents[1];
    const double* pv = pp.values.data();
    const double* qv = pq.values.data();
    const double g = self.grad[0];
    if (pp.requires_grad) {
      pp.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double a = 0.5 * (pv[i] + qv[i]);
        if (pv[i] > 0.0) pp.grad[i] += g * 0.5 * std::log(pv[i] / a);
      }
    }
    if (pq.requires_grad) {
      pq.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double a = 0.5 * (pv[i] + qv[i]);
        if (qv[i] > 0.0) pq.grad[i] += g * 0.5 * std::log(qv[i] / a);
      }
    }
  });
}

double grad_check(const std::function<Tensor()>& f, Tensor param, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw std::invalid_argument("grad_check: eps " + std::to_string(eps) +
                                " outside [1e-7, 1e-3]");
  if (!param.is_leaf()) throw std::invalid_argument("grad_check: param must be a leaf");
  param.zero_grad();
  Tensor loss = f();
  if (loss.numel() != 1)
    throw std::invalid_argument("grad_check: f must return a scalar");
  backward(loss, GradMode::Reset);
  std::vector<double> analytic(param.grad().begin(), param.grad().end());
  if (analytic.empty()) analytic.assign(param.numel(), 0.0);

  auto eval = [&]() {
    NoGradGuard ng;
    double v = f().item();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
    return v;
  };
  auto vals = param.values_mut();
  double max_rel = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double keep = vals[i];
    vals[i] = keep + eps;
    const double up = eval();
    vals[i] = keep - eps;
    const double dn = eval();
    vals[i] = keep;
    const double numeric = (up - dn) / (2.0 * eps);
    if (!std::isfinite(numeric)) throw std::runtime_error("grad_check: non-finite diff");
    const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
    max_rel = std::max(max_rel, std::fabs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace sdit
