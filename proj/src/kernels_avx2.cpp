// AVX2 variants of the element kernels. This TU is the only one built with
// -mavx2/-mfma; it must not be entered unless __builtin_cpu_supports("avx2").
#include <immintrin.h>

#include <cstddef>
#include <cstdint>

namespace wcto::kernels::avx2_impl {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// w = Khat * uloc for the symmetric 8x8 block: accumulate rows scaled by u_j
// (rows double as columns). uloc given as two 4-lane halves.
inline void kmul(const double* Khat, __m256d u_lo, __m256d u_hi, __m256d& w_lo,
                 __m256d& w_hi) {
  w_lo = _mm256_setzero_pd();
  w_hi = _mm256_setzero_pd();
  alignas(32) double uj[8];
  _mm256_store_pd(uj, u_lo);
  _mm256_store_pd(uj + 4, u_hi);
  for (int j = 0; j < 8; ++j) {
    const __m256d s = _mm256_set1_pd(uj[j]);
    w_lo = _mm256_fmadd_pd(s, _mm256_loadu_pd(Khat + 8 * j), w_lo);
    w_hi = _mm256_fmadd_pd(s, _mm256_loadu_pd(Khat + 8 * j + 4), w_hi);
  }
}

inline void gather(const double* u, const std::int32_t* d, __m256d& lo, __m256d& hi) {
  const __m128i i_lo = _mm_loadu_si128(reinterpret_cast<const __m128i*>(d));
  const __m128i i_hi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(d + 4));
  lo = _mm256_i32gather_pd(u, i_lo, 8);
  hi = _mm256_i32gather_pd(u, i_hi, 8);
}

}  // namespace

void law_inverse_eval(const double* delta, std::size_t n, double a, double b,
                      double* E, double* dE, double* d2E) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two_b2 = _mm256_set1_pd(2.0 * b * b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(delta + i);
    const __m256d e = _mm256_div_pd(one, _mm256_fmadd_pd(vb, d, va));
    const __m256d e2 = _mm256_mul_pd(e, e);
    if (E) _mm256_storeu_pd(E + i, e);
    if (dE) _mm256_storeu_pd(dE + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), vb), e2));
    if (d2E) _mm256_storeu_pd(d2E + i, _mm256_mul_pd(two_b2, _mm256_mul_pd(e2, e)));
  }
  for (; i < n; ++i) {
    const double e = 1.0 / (a + b * delta[i]);
    if (E) E[i] = e;
    if (dE) dE[i] = -b * e * e;
    if (d2E) d2E[i] = 2.0 * b * b * e * e * e;
  }
}

void law_ramp_eval(const double* delta, std::size_t n, double E0, double ED,
                   double q, double* E, double* dE, double* d2E) {
  const double s = E0 - ED;
  const __m256d vq = _mm256_set1_pd(q);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d vED = _mm256_set1_pd(ED);
  const __m256d vs = _mm256_set1_pd(s);
  const __m256d c1 = _mm256_set1_pd(-s * (1.0 + q));
  const __m256d c2 = _mm256_set1_pd(2.0 * s * q * (1.0 + q));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(delta + i);
    const __m256d r = _mm256_div_pd(one, _mm256_fmadd_pd(vq, d, one));
    const __m256d r2 = _mm256_mul_pd(r, r);
    if (E)
      _mm256_storeu_pd(E + i, _mm256_fmadd_pd(_mm256_mul_pd(_mm256_sub_pd(one, d), vs), r, vED));
    if (dE) _mm256_storeu_pd(dE + i, _mm256_mul_pd(c1, r2));
    if (d2E) _mm256_storeu_pd(d2E + i, _mm256_mul_pd(c2, _mm256_mul_pd(r2, r)));
  }
  for (; i < n; ++i) {
    const double r = 1.0 / (1.0 + q * delta[i]);
    if (E) E[i] = ED + (1.0 - delta[i]) * s * r;
    if (dE) dE[i] = -s * (1.0 + q) * r * r;
    if (d2E) d2E[i] = 2.0 * s * q * (1.0 + q) * r * r * r;
  }
}

void barrier_terms(const double* delta, std::size_t n, double* b1, double* b2) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(delta + i);
    const __m256d ilo = _mm256_div_pd(one, d);
    const __m256d ihi = _mm256_div_pd(one, _mm256_sub_pd(one, d));
    if (b1) _mm256_storeu_pd(b1 + i, _mm256_sub_pd(ilo, ihi));
    if (b2)
      _mm256_storeu_pd(b2 + i, _mm256_fmadd_pd(ilo, ilo, _mm256_mul_pd(ihi, ihi)));
  }
  for (; i < n; ++i) {
    const double inv_lo = 1.0 / delta[i];
    const double inv_hi = 1.0 / (1.0 - delta[i]);
    if (b1) b1[i] = inv_lo - inv_hi;
    if (b2) b2[i] = inv_lo * inv_lo + inv_hi * inv_hi;
  }
}

void element_energies(const double* u, const std::int32_t* dofs, std::size_t n,
                      const double* Khat, double* energy) {
  for (std::size_t e = 0; e < n; ++e) {
    __m256d u_lo, u_hi, w_lo, w_hi;
    gather(u, dofs + 8 * e, u_lo, u_hi);
    kmul(Khat, u_lo, u_hi, w_lo, w_hi);
    energy[e] = hsum(_mm256_fmadd_pd(u_lo, w_lo, _mm256_mul_pd(u_hi, w_hi)));
  }
}

void element_apply_dot(const double* u, const double* y, const std::int32_t* dofs,
                       std::size_t n, const double* Khat, double* out) {
  for (std::size_t e = 0; e < n; ++e) {
    __m256d u_lo, u_hi, y_lo, y_hi, w_lo, w_hi;
    gather(u, dofs + 8 * e, u_lo, u_hi);
    gather(y, dofs + 8 * e, y_lo, y_hi);
    kmul(Khat, u_lo, u_hi, w_lo, w_hi);
    out[e] = hsum(_mm256_fmadd_pd(y_lo, w_lo, _mm256_mul_pd(y_hi, w_hi)));
  }
}

void element_scatter_add(const double* u, const std::int32_t* dofs, std::size_t n,
                         const double* Khat, const double* c, double* out) {
  alignas(32) double w[8];
  for (std::size_t e = 0; e < n; ++e) {
    __m256d u_lo, u_hi, w_lo, w_hi;
    gather(u, dofs + 8 * e, u_lo, u_hi);
    kmul(Khat, u_lo, u_hi, w_lo, w_hi);
    const __m256d ce = _mm256_set1_pd(c[e]);
    _mm256_store_pd(w, _mm256_mul_pd(ce, w_lo));
    _mm256_store_pd(w + 4, _mm256_mul_pd(ce, w_hi));
    const std::int32_t* d = dofs + 8 * e;
    for (int i = 0; i < 8; ++i) out[d[i]] += w[i];
  }
}

}  // namespace wcto::kernels::avx2_impl
