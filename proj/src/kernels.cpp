#include "sdit/kernels.hpp"

#include <stdexcept>

namespace sdit::kernels {

bool avx2_available() {
#if SDIT_HAVE_AVX2
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Ops& table(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return scalar_ops();
    case Backend::Avx2:
#if SDIT_HAVE_AVX2
      if (avx2_available()) return avx2_ops();
#endif
      throw std::runtime_error("kernels: avx2 backend unavailable on this host");
    case Backend::Auto:
    default:
#if SDIT_HAVE_AVX2
      if (avx2_available()) return avx2_ops();
#endif
      return scalar_ops();
  }
}

namespace {
const Ops* g_active = &table(Backend::Auto);
}

void select(Backend b) { g_active = &table(b); }

const Ops& active() { return *g_active; }

}  // namespace sdit::kernels
