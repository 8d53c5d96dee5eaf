// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "semlab/error.hpp"
#include "semlab/simd/kernels.hpp"

namespace semlab::simd {
namespace {

bool cpu_has_avx2_fma() noexcept {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{[] {
    try {
      return detect_isa();
    } catch (const Error& e) {
      std::fprintf(stderr, "semlab: %s; using scalar kernels\n", e.what());
      return Isa::kScalar;
    }
  }()};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return detail::avx2_f32() != nullptr && cpu_has_avx2_fma();
    case Isa::kNeon:
      return detail::neon_f32() != nullptr;
  }
  return false;
}

Isa detect_isa() {
  if (const char* env = std::getenv("SEMLAB_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (want == isa_name(isa)) {
        if (!isa_available(isa))
          throw ConfigError("SEMLAB_ISA=" + want + " is not supported on this CPU");
        return isa;
      }
    }
    throw ConfigError("unknown SEMLAB_ISA value '" + want + "'");
  }
  if (isa_available(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_available(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

Isa active_isa() noexcept { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa))
    throw ConfigError("ISA " + std::string(isa_name(isa)) + " is not available");
  active_slot().store(isa, std::memory_order_relaxed);
}

template <>
const KernelTable<float>& kernels<float>(Isa isa) noexcept {
  if (isa_available(isa)) {
    if (isa == Isa::kAvx2) return *detail::avx2_f32();
    if (isa == Isa::kNeon) return *detail::neon_f32();
  }
  return detail::scalar_f32();
}

template <>
const KernelTable<double>& kernels<double>(Isa isa) noexcept {
  if (isa_available(isa)) {
    if (isa == Isa::kAvx2) return *detail::avx2_f64();
    if (isa == Isa::kNeon) return *detail::neon_f64();
  }
  return detail::scalar_f64();
}

}  // namespace semlab::simd
