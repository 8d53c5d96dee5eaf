// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. These define the semantics every SIMD variant is tested
// against; keep them obviously correct rather than fast.
#include <cmath>

#include "semlab/simd/kernels.hpp"

namespace semlab::simd::detail {
namespace {

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * lda + p];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = T(0);
      for (std::size_t p = 0; p < k; ++p) sum += a[i * lda + p] * b[j * ldb + p];
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + sum : sum;
    }
  }
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = T(0);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const T api = a[p * lda + i];
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  T sum = T(0);
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void leaky_relu(std::size_t n, T slope, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_backward(std::size_t n, T slope, const T* x, const T* dy,
                         T* dx) {
  for (std::size_t i = 0; i < n; ++i)
    dx[i] += x[i] > T(0) ? dy[i] : slope * dy[i];
}

template <class T>
void adam_update(std::size_t n, const AdamCoeffs<T>& c, T* param,
                 const T* grad, T* m, T* v) {
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = c.beta1 * m[i] + (T(1) - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (T(1) - c.beta2) * g * g;
    const T m_hat = m[i] / c.bias_correction1;
    const T v_hat = v[i] / c.bias_correction2;
    param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

template <class T>
constexpr KernelTable<T> make_table() {
  return KernelTable<T>{&gemm_nn<T>,    &gemm_nt<T>,
                        &gemm_tn<T>,    &dot<T>,
                        &axpy<T>,       &leaky_relu<T>,
                        &leaky_relu_backward<T>, &adam_update<T>};
}

constexpr KernelTable<float> kScalarF32 = make_table<float>();
constexpr KernelTable<double> kScalarF64 = make_table<double>();

}  // namespace

const KernelTable<float>& scalar_f32() noexcept { return kScalarF32; }
const KernelTable<double>& scalar_f64() noexcept { return kScalarF64; }

}  // namespace semlab::simd::detail
