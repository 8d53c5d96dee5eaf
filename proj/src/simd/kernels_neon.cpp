// SPDX-License-Identifier: Apache-2.0
//
// NEON kernels for aarch64, where Advanced SIMD is architecturally mandatory.
// Elementwise and dot kernels are vectorized; the GEMM variants vectorize the
// innermost column loop only.
#include "semlab/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace semlab::simd::detail {
namespace {

template <class T>
struct V;

template <>
struct V<float> {
  using R = float32x4_t;
  static constexpr std::size_t L = 4;
  static R zero() { return vdupq_n_f32(0.0f); }
  static R load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, R v) { vst1q_f32(p, v); }
  static R set1(float x) { return vdupq_n_f32(x); }
  static R fma(R a, R b, R c) { return vfmaq_f32(c, a, b); }
  static R add(R a, R b) { return vaddq_f32(a, b); }
  static R mul(R a, R b) { return vmulq_f32(a, b); }
  static R div(R a, R b) { return vdivq_f32(a, b); }
  static R sqrt(R a) { return vsqrtq_f32(a); }
  static R select_pos(R x, R pos, R neg) {
    return vbslq_f32(vcgtq_f32(x, zero()), pos, neg);
  }
  static float hsum(R v) { return vaddvq_f32(v); }
};

template <>
struct V<double> {
  using R = float64x2_t;
  static constexpr std::size_t L = 2;
  static R zero() { return vdupq_n_f64(0.0); }
  static R load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, R v) { vst1q_f64(p, v); }
  static R set1(double x) { return vdupq_n_f64(x); }
  static R fma(R a, R b, R c) { return vfmaq_f64(c, a, b); }
  static R add(R a, R b) { return vaddq_f64(a, b); }
  static R mul(R a, R b) { return vmulq_f64(a, b); }
  static R div(R a, R b) { return vdivq_f64(a, b); }
  static R sqrt(R a) { return vsqrtq_f64(a); }
  static R select_pos(R x, R pos, R neg) {
    return vbslq_f64(vcgtq_f64(x, zero()), pos, neg);
  }
  static double hsum(R v) { return vaddvq_f64(v); }
};

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  using W = V<T>;
  const typename W::R av = W::set1(a);
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L)
    W::store(y + i, W::fma(av, W::load(x + i), W::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  using W = V<T>;
  typename W::R acc = W::zero();
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L) acc = W::fma(W::load(x + i), W::load(y + i), acc);
  T sum = W::hsum(acc);
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) axpy<T>(n, a[i * lda + p], b + p * ldb, crow);
  }
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const T sum = dot<T>(k, a + i * lda, b + j * ldb);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + sum : sum;
    }
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = T(0);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i)
      axpy<T>(n, a[p * lda + i], b + p * ldb, c + i * ldc);
}

template <class T>
void leaky_relu(std::size_t n, T slope, const T* x, T* y) {
  using W = V<T>;
  const typename W::R sv = W::set1(slope);
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L) {
    const typename W::R xv = W::load(x + i);
    W::store(y + i, W::select_pos(xv, xv, W::mul(sv, xv)));
  }
  for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_backward(std::size_t n, T slope, const T* x, const T* dy,
                         T* dx) {
  using W = V<T>;
  const typename W::R sv = W::set1(slope);
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L) {
    const typename W::R g = W::load(dy + i);
    const typename W::R local = W::select_pos(W::load(x + i), g, W::mul(sv, g));
    W::store(dx + i, W::add(W::load(dx + i), local));
  }
  for (; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : slope * dy[i];
}

template <class T>
void adam_update(std::size_t n, const AdamCoeffs<T>& c, T* param,
                 const T* grad, T* m, T* v) {
  using W = V<T>;
  const typename W::R b1 = W::set1(c.beta1), one_b1 = W::set1(T(1) - c.beta1);
  const typename W::R b2 = W::set1(c.beta2), one_b2 = W::set1(T(1) - c.beta2);
  const typename W::R inv_bc1 = W::set1(T(1) / c.bias_correction1);
  const typename W::R inv_bc2 = W::set1(T(1) / c.bias_correction2);
  const typename W::R neg_lr = W::set1(-c.lr), eps = W::set1(c.eps);
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L) {
    const typename W::R g = W::load(grad + i);
    const typename W::R mv = W::add(W::mul(b1, W::load(m + i)), W::mul(one_b1, g));
    const typename W::R vv =
        W::add(W::mul(b2, W::load(v + i)), W::mul(one_b2, W::mul(g, g)));
    W::store(m + i, mv);
    W::store(v + i, vv);
    const typename W::R denom = W::add(W::sqrt(W::mul(vv, inv_bc2)), eps);
    const typename W::R step = W::div(W::mul(mv, inv_bc1), denom);
    W::store(param + i, W::fma(neg_lr, step, W::load(param + i)));
  }
  for (; i < n; ++i) {
    const T g = grad[i];
    m[i] = c.beta1 * m[i] + (T(1) - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (T(1) - c.beta2) * g * g;
    param[i] -= c.lr * (m[i] / c.bias_correction1) /
                (__builtin_sqrt(v[i] / c.bias_correction2) + c.eps);
  }
}

template <class T>
constexpr KernelTable<T> make_table() {
  return KernelTable<T>{&gemm_nn<T>,    &gemm_nt<T>,
                        &gemm_tn<T>,    &dot<T>,
                        &axpy<T>,       &leaky_relu<T>,
                        &leaky_relu_backward<T>, &adam_update<T>};
}

constexpr KernelTable<float> kNeonF32 = make_table<float>();
constexpr KernelTable<double> kNeonF64 = make_table<double>();

}  // namespace

const KernelTable<float>* neon_f32() noexcept { return &kNeonF32; }
const KernelTable<double>* neon_f64() noexcept { return &kNeonF64; }

}  // namespace semlab::simd::detail

#else

namespace semlab::simd::detail {
const KernelTable<float>* neon_f32() noexcept { return nullptr; }
const KernelTable<double>* neon_f64() noexcept { return nullptr; }
}  // namespace semlab::simd::detail

#endif
