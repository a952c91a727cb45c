#include <atomic>
#include <cstdlib>
#include <string_view>

#include "ccml/simd/kernels.hpp"

namespace ccml::simd {

// Defined in the ISA-specific TUs when they are compiled in.
#ifdef CCML_HAVE_AVX2
const KernelTable& avx2_table() noexcept;
#endif
#ifdef CCML_HAVE_NEON
const KernelTable& neon_table() noexcept;
#endif

namespace {

const KernelTable* detect() noexcept {
  if (const char* env = std::getenv("CCML_ISA")) {
    const std::string_view want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels()) return avx2_kernels();
    if (want == "neon" && neon_kernels()) return neon_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() noexcept {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() noexcept {
#ifdef CCML_HAVE_AVX2
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() noexcept {
#ifdef CCML_HAVE_NEON
  return &neon_table();  // Advanced SIMD is mandatory on AArch64.
#else
  return nullptr;
#endif
}

const KernelTable& kernels() noexcept { return *active().load(std::memory_order_acquire); }

bool force_isa(Isa isa) noexcept {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::Scalar: t = &scalar_kernels(); break;
    case Isa::Avx2: t = avx2_kernels(); break;
    case Isa::Neon: t = neon_kernels(); break;
  }
  if (!t) return false;
  active().store(t, std::memory_order_release);
  return true;
}

}  // namespace ccml::simd
