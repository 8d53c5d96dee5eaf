// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma, so
// it must not instantiate any inline library code that could be picked by the
// linker for use on CPUs without AVX2. Only intrinsics and plain loops here.
#include "semlab/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <cstdlib>

namespace semlab::simd::detail {
namespace {

template <class T>
struct V;

template <>
struct V<float> {
  using R = __m256;
  static constexpr std::size_t L = 8;
  static R zero() { return _mm256_setzero_ps(); }
  static R load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, R v) { _mm256_storeu_ps(p, v); }
  static R set1(float x) { return _mm256_set1_ps(x); }
  static R fma(R a, R b, R c) { return _mm256_fmadd_ps(a, b, c); }
  static R add(R a, R b) { return _mm256_add_ps(a, b); }
  static R mul(R a, R b) { return _mm256_mul_ps(a, b); }
  static R div(R a, R b) { return _mm256_div_ps(a, b); }
  static R sqrt(R a) { return _mm256_sqrt_ps(a); }
  static R gt_zero(R a) { return _mm256_cmp_ps(a, zero(), _CMP_GT_OQ); }
  // lanes of `b` where mask is set, `a` elsewhere
  static R select(R a, R b, R mask) { return _mm256_blendv_ps(a, b, mask); }
  static float hsum(R v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct V<double> {
  using R = __m256d;
  static constexpr std::size_t L = 4;
  static R zero() { return _mm256_setzero_pd(); }
  static R load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, R v) { _mm256_storeu_pd(p, v); }
  static R set1(double x) { return _mm256_set1_pd(x); }
  static R fma(R a, R b, R c) { return _mm256_fmadd_pd(a, b, c); }
  static R add(R a, R b) { return _mm256_add_pd(a, b); }
  static R mul(R a, R b) { return _mm256_mul_pd(a, b); }
  static R div(R a, R b) { return _mm256_div_pd(a, b); }
  static R sqrt(R a) { return _mm256_sqrt_pd(a); }
  static R gt_zero(R a) { return _mm256_cmp_pd(a, zero(), _CMP_GT_OQ); }
  static R select(R a, R b, R mask) { return _mm256_blendv_pd(a, b, mask); }
  static double hsum(R v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

// Blocking for the packed path: a kKc x kNc panel of B stays in L2 while
// every row tile of A streams past it.
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 512;
constexpr std::size_t kMr = 6;

// MR rows of C by two vectors, B packed with leading dimension ldp. A is
// addressed through strides so the same tile serves A and A^T.
template <class T, int MR>
inline void micro_tile(std::size_t kc, const T* a, std::size_t a_rs, std::size_t a_cs,
                       const T* bp, std::size_t ldp, T* c, std::size_t ldc,
                       std::size_t cols) {
  using W = V<T>;
  typename W::R acc[MR][2];
  for (int r = 0; r < MR; ++r) acc[r][0] = acc[r][1] = W::zero();
  for (std::size_t p = 0; p < kc; ++p) {
    const typename W::R b0 = W::load(bp + p * ldp);
    const typename W::R b1 = W::load(bp + p * ldp + W::L);
    for (int r = 0; r < MR; ++r) {
      const typename W::R av = W::set1(a[r * a_rs + p * a_cs]);
      acc[r][0] = W::fma(av, b0, acc[r][0]);
      acc[r][1] = W::fma(av, b1, acc[r][1]);
    }
  }
  if (cols == 2 * W::L) {
    for (int r = 0; r < MR; ++r) {
      T* dst = c + r * ldc;
      W::store(dst, W::add(W::load(dst), acc[r][0]));
      W::store(dst + W::L, W::add(W::load(dst + W::L), acc[r][1]));
    }
    return;
  }
  alignas(32) T tmp[2 * W::L];
  for (int r = 0; r < MR; ++r) {
    W::store(tmp, acc[r][0]);
    W::store(tmp + W::L, acc[r][1]);
    for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] += tmp[j];
  }
}

template <class T>
inline void micro_dispatch(std::size_t mr, std::size_t kc, const T* a, std::size_t a_rs,
                           std::size_t a_cs, const T* bp, std::size_t ldp, T* c,
                           std::size_t ldc, std::size_t cols) {
  switch (mr) {
    case 6: micro_tile<T, 6>(kc, a, a_rs, a_cs, bp, ldp, c, ldc, cols); break;
    case 5: micro_tile<T, 5>(kc, a, a_rs, a_cs, bp, ldp, c, ldc, cols); break;
    case 4: micro_tile<T, 4>(kc, a, a_rs, a_cs, bp, ldp, c, ldc, cols); break;
    case 3: micro_tile<T, 3>(kc, a, a_rs, a_cs, bp, ldp, c, ldc, cols); break;
    case 2: micro_tile<T, 2>(kc, a, a_rs, a_cs, bp, ldp, c, ldc, cols); break;
    default: micro_tile<T, 1>(kc, a, a_rs, a_cs, bp, ldp, c, ldc, cols); break;
  }
}

// Per-thread packing buffer from the C allocator; no library templates are
// instantiated in this translation unit.
template <class T>
T* pack_buffer() {
  static thread_local T* buf = nullptr;
  if (!buf)
    buf = static_cast<T*>(std::aligned_alloc(32, kKc * (kNc + 2 * V<T>::L) * sizeof(T)));
  return buf;
}

// C (+)= op(A) op(B) with op(A)[i,p] = a[i*a_rs + p*a_cs] and
// op(B)[p,j] = b[p*b_rs + j*b_cs].
template <class T>
void gemm_packed(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_rs,
                 std::size_t a_cs, const T* b, std::size_t b_rs, std::size_t b_cs, T* c,
                 std::size_t ldc, bool accumulate) {
  using W = V<T>;
  if (!accumulate)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = T(0);
  if (k == 0) return;
  T* bp = pack_buffer<T>();
  if (!bp) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j)
          c[i * ldc + j] += a[i * a_rs + p * a_cs] * b[p * b_rs + j * b_cs];
    return;
  }
  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = n - jc < kNc ? n - jc : kNc;
    const std::size_t ldp = (nc + 2 * W::L - 1) / (2 * W::L) * (2 * W::L);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = k - pc < kKc ? k - pc : kKc;
      if (b_cs == 1) {
        for (std::size_t p = 0; p < kc; ++p) {
          const T* src = b + (pc + p) * b_rs + jc;
          T* dst = bp + p * ldp;
          for (std::size_t j = 0; j < nc; ++j) dst[j] = src[j];
          for (std::size_t j = nc; j < ldp; ++j) dst[j] = T(0);
        }
      } else {
        for (std::size_t j = 0; j < nc; ++j) {
          const T* src = b + (jc + j) * b_cs + pc * b_rs;
          for (std::size_t p = 0; p < kc; ++p) bp[p * ldp + j] = src[p * b_rs];
        }
        for (std::size_t p = 0; p < kc; ++p)
          for (std::size_t j = nc; j < ldp; ++j) bp[p * ldp + j] = T(0);
      }
      for (std::size_t i = 0; i < m; i += kMr) {
        const std::size_t mr = m - i < kMr ? m - i : kMr;
        const T* ai = a + i * a_rs + pc * a_cs;
        for (std::size_t j = 0; j < nc; j += 2 * W::L) {
          const std::size_t cols = nc - j < 2 * W::L ? nc - j : 2 * W::L;
          micro_dispatch<T>(mr, kc, ai, a_rs, a_cs, bp + j, ldp, c + i * ldc + jc + j, ldc,
                            cols);
        }
      }
    }
  }
}

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  gemm_packed(m, n, k, a, lda, 1, b, ldb, 1, c, ldc, accumulate);
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  gemm_packed(m, n, k, a, 1, lda, b, ldb, 1, c, ldc, accumulate);
}

// MR rows of A dotted with NR rows of B.
template <class T, int MR, int NR>
inline void tile_dot(std::size_t k, const T* a, std::size_t lda, const T* b,
                     std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  using W = V<T>;
  typename W::R acc[MR][NR];
  for (int r = 0; r < MR; ++r)
    for (int s = 0; s < NR; ++s) acc[r][s] = W::zero();
  std::size_t p = 0;
  for (; p + W::L <= k; p += W::L) {
    typename W::R bv[NR];
    for (int s = 0; s < NR; ++s) bv[s] = W::load(b + s * ldb + p);
    for (int r = 0; r < MR; ++r) {
      const typename W::R av = W::load(a + r * lda + p);
      for (int s = 0; s < NR; ++s) acc[r][s] = W::fma(av, bv[s], acc[r][s]);
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int s = 0; s < NR; ++s) {
      T sum = W::hsum(acc[r][s]);
      for (std::size_t q = p; q < k; ++q) sum += a[r * lda + q] * b[s * ldb + q];
      T& dst = c[r * ldc + s];
      dst = accumulate ? dst + sum : sum;
    }
}

template <class T>
void gemm_nt_dot(std::size_t m, std::size_t n, std::size_t k, const T* a,
                 std::size_t lda, const T* b, std::size_t ldb, T* c,
                 std::size_t ldc, bool accumulate) {
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4)
      tile_dot<T, 4, 2>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j,
                        ldc, accumulate);
    for (; i < m; ++i)
      tile_dot<T, 1, 2>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j,
                        ldc, accumulate);
  }
  for (; j < n; ++j) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4)
      tile_dot<T, 4, 1>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j,
                        ldc, accumulate);
    for (; i < m; ++i)
      tile_dot<T, 1, 1>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j,
                        ldc, accumulate);
  }
}

// Packing B^T only pays off when enough rows of A reuse the panel.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  if (m < 128)
    gemm_nt_dot(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    gemm_packed(m, n, k, a, lda, 1, b, 1, ldb, c, ldc, accumulate);
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  using W = V<T>;
  typename W::R acc0 = W::zero(), acc1 = W::zero();
  std::size_t i = 0;
  for (; i + 2 * W::L <= n; i += 2 * W::L) {
    acc0 = W::fma(W::load(x + i), W::load(y + i), acc0);
    acc1 = W::fma(W::load(x + i + W::L), W::load(y + i + W::L), acc1);
  }
  for (; i + W::L <= n; i += W::L)
    acc0 = W::fma(W::load(x + i), W::load(y + i), acc0);
  T sum = W::hsum(W::add(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

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
void leaky_relu(std::size_t n, T slope, const T* x, T* y) {
  using W = V<T>;
  const typename W::R sv = W::set1(slope);
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L) {
    const typename W::R xv = W::load(x + i);
    W::store(y + i, W::select(W::mul(sv, xv), xv, W::gt_zero(xv)));
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
    const typename W::R local =
        W::select(W::mul(sv, g), g, W::gt_zero(W::load(x + i)));
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
  const typename W::R lr = W::set1(c.lr), eps = W::set1(c.eps);
  std::size_t i = 0;
  for (; i + W::L <= n; i += W::L) {
    const typename W::R g = W::load(grad + i);
    const typename W::R mv = W::add(W::mul(b1, W::load(m + i)), W::mul(one_b1, g));
    const typename W::R vv =
        W::add(W::mul(b2, W::load(v + i)), W::mul(one_b2, W::mul(g, g)));
    W::store(m + i, mv);
    W::store(v + i, vv);
    const typename W::R denom = W::add(W::sqrt(W::mul(vv, inv_bc2)), eps);
    const typename W::R step = W::div(W::mul(lr, W::mul(mv, inv_bc1)), denom);
    W::store(param + i, W::add(W::load(param + i), W::mul(W::set1(T(-1)), step)));
  }
  for (; i < n; ++i) {
    const T g = grad[i];
    m[i] = c.beta1 * m[i] + (T(1) - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (T(1) - c.beta2) * g * g;
    const T m_hat = m[i] / c.bias_correction1;
    const T v_hat = v[i] / c.bias_correction2;
    param[i] -= c.lr * m_hat / (__builtin_sqrt(v_hat) + c.eps);
  }
}

template <class T>
constexpr KernelTable<T> make_table() {
  return KernelTable<T>{&gemm_nn<T>,    &gemm_nt<T>,
                        &gemm_tn<T>,    &dot<T>,
                        &axpy<T>,       &leaky_relu<T>,
                        &leaky_relu_backward<T>, &adam_update<T>};
}

// constant-initialized: no AVX code may run before the CPU check
constexpr KernelTable<float> kAvx2F32 = make_table<float>();
constexpr KernelTable<double> kAvx2F64 = make_table<double>();

}  // namespace

const KernelTable<float>* avx2_f32() noexcept { return &kAvx2F32; }
const KernelTable<double>* avx2_f64() noexcept { return &kAvx2F64; }

}  // namespace semlab::simd::detail

#else

namespace semlab::simd::detail {
const KernelTable<float>* avx2_f32() noexcept { return nullptr; }
const KernelTable<double>* avx2_f64() noexcept { return nullptr; }
}  // namespace semlab::simd::detail

#endif
