#include <atomic>
#include <cstdlib>
#include <string_view>

#include <spdlog/spdlog.h>

#include "kt/simd/kernels.hpp"

namespace kt::simd {
namespace {

[[maybe_unused]] bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select_default() {
  const char* forced = std::getenv("KT_SIMD");
  const KernelTable* avx2 = avx2_kernels();
  if (forced && std::string_view(forced) == "scalar") return scalar_kernels();
  if (forced && std::string_view(forced) == "avx2" && !avx2) {
    spdlog::warn("KT_SIMD=avx2 requested but unavailable; using scalar kernels");
  }
  return avx2 ? *avx2 : scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&select_default()};
  return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(KT_HAVE_AVX2_KERNELS)
  static const bool supported = cpu_has_avx2();
  return supported ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_relaxed); }

const KernelTable& set_active_kernels(const KernelTable& table) {
  return *active_slot().exchange(&table);
}

}  // namespace kt::simd
