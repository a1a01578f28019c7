#include <atomic>

#include "movekit/common.hpp"
#include "movekit/simd.hpp"

namespace movekit::simd {

bool avx2_supported() {
#if defined(MOVEKIT_HAVE_AVX2_BUILD)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Kernels* pick(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &scalar_kernels();
    case Backend::avx2:
#if defined(MOVEKIT_HAVE_AVX2_BUILD)
      if (avx2_supported()) return &avx2_kernels();
#endif
      fail(Errc::invalid_argument, "avx2 backend not available on this machine");
    case Backend::automatic:
    default:
#if defined(MOVEKIT_HAVE_AVX2_BUILD)
      if (avx2_supported()) return &avx2_kernels();
#endif
      return &scalar_kernels();
  }
}

std::atomic<const Kernels*> g_active{nullptr};

}  // namespace

void set_backend(Backend b) { g_active.store(pick(b), std::memory_order_relaxed); }

const Kernels& active() {
  const Kernels* k = g_active.load(std::memory_order_relaxed);
  if (!k) {
    k = pick(Backend::automatic);
    g_active.store(k, std::memory_order_relaxed);
  }
  return *k;
}

const char* active_name() {
#if defined(MOVEKIT_HAVE_AVX2_BUILD)
  if (&active() == &avx2_kernels()) return "avx2";
#endif
  return "scalar";
}

}  // namespace movekit::simd
