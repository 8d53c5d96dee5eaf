// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops used by the numerics layer. Each kernel has a
// scalar reference implementation and SIMD variants (AVX2+FMA on x86-64,
// NEON on aarch64). The variant is chosen once at startup from CPUID and can
// be overridden with SEMLAB_ISA=scalar|avx2|neon.
//
// All matrices are row-major with explicit leading dimensions.
#pragma once

#include <cstddef>
#include <string_view>

namespace semlab::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;

/// Best ISA for this CPU, honoring the SEMLAB_ISA override.
Isa detect_isa();
Isa active_isa() noexcept;
/// Throws ConfigError when `isa` is not supported by the running CPU.
void set_active_isa(Isa isa);

template <class T>
struct AdamCoeffs {
  T lr;
  T beta1;
  T beta2;
  T eps;
  T bias_correction1;  // 1 - beta1^t
  T bias_correction2;  // 1 - beta2^t
};

template <class T>
struct KernelTable {
  /// C[m,n] (+)= A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate);
  /// C[m,n] (+)= A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate);
  /// C[m,n] (+)= A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate);
  T (*dot)(std::size_t n, const T* x, const T* y);
  /// y += a * x
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  void (*leaky_relu)(std::size_t n, T slope, const T* x, T* y);
  /// dx += dy * (x > 0 ? 1 : slope)
  void (*leaky_relu_backward)(std::size_t n, T slope, const T* x, const T* dy,
                              T* dx);
  void (*adam_update)(std::size_t n, const AdamCoeffs<T>& c, T* param,
                      const T* grad, T* m, T* v);
};

/// Table for a specific ISA. Falls back to scalar for unavailable ISAs.
template <class T>
const KernelTable<T>& kernels(Isa isa) noexcept;

/// Table for the active ISA.
template <class T>
const KernelTable<T>& kernels() noexcept {
  return kernels<T>(active_isa());
}

namespace detail {
const KernelTable<float>& scalar_f32() noexcept;
const KernelTable<double>& scalar_f64() noexcept;
const KernelTable<float>* avx2_f32() noexcept;
const KernelTable<double>* avx2_f64() noexcept;
const KernelTable<float>* neon_f32() noexcept;
const KernelTable<double>* neon_f64() noexcept;
}  // namespace detail

}  // namespace semlab::simd
