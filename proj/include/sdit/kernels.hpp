#pragma once

#include <cstddef>

namespace sdit::kernels {

// Flat-array arithmetic used by the tensor layer. Every entry has a scalar
// reference implementation; vector variants must match it exactly for the
// elementwise ops and matmul (same operation order, no FMA contraction) and
// to ~1e-13 relative for the reductions (different accumulation order).
struct Ops {
  const char* name;
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double c, double* out, std::size_t n);
  // y += a*x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y = a*x + b*y
  void (*axpby)(double a, const double* x, double b, double* y, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // c[m x n] = a[m x k] * b[k x n], row-major; c is overwritten.
  void (*matmul)(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n);
  // Decoupled-weight-decay Adam update, all buffers length n.
  // bias1/bias2 are the step's bias corrections (1 - beta^step).
  void (*adam_step)(double* p, double* m, double* v, const double* g,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double bias1, double bias2, double weight_decay);
};

enum class Backend { Auto, Scalar, Avx2 };

const Ops& scalar_ops();
#if SDIT_HAVE_AVX2
const Ops& avx2_ops();
#endif

// True when the AVX2 table is compiled in and this CPU supports it.
bool avx2_available();

// Resolve a backend to its table; Auto picks the best available.
// Throws std::runtime_error for an unavailable explicit backend.
const Ops& table(Backend b);

// Process-wide selection used by the tensor layer.
void select(Backend b);
const Ops& active();

}  // namespace sdit::kernels
