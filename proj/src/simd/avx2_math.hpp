// Copyright 2026 The GPCIS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Double-precision exp and sincos on __m256d. Only included from the AVX2
// translation unit. Accuracy is a few ulp over the ranges the kernels see
// (exp arguments <= 0, trig arguments |x| < 2^20); callers fall back to libm
// for lanes outside that range.

#include <immintrin.h>

namespace gpcis::simd::avx2 {

inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d lo_limit = _mm256_set1_pd(-708.0);
  const __m256d hi_limit = _mm256_set1_pd(708.0);

  const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);

  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);

  // Taylor series to degree 13 on |r| <= ln2/2.
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // 2^k assembled in the exponent field; k is within [-1022, 1022] after clamping.
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, result);
}

// sin and cos of x. Lanes with |x| >= 2^20 must be handled by the caller.
inline void sincos_pd(__m256d x, __m256d* sin_out, __m256d* cos_out) {
  const __m256d two_over_pi = _mm256_set1_pd(0.63661977236758134308);
  // pi/2 split into three parts with trailing zero bits (Cody-Waite).
  const __m256d pio2_1 = _mm256_set1_pd(1.57079632673412561417e+00);
  const __m256d pio2_2 = _mm256_set1_pd(6.07710050650619224932e-11);
  const __m256d pio2_3 = _mm256_set1_pd(2.02226624879595063154e-21);

  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, two_over_pi), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, pio2_1, x);
  r = _mm256_fnmadd_pd(k, pio2_2, r);
  r = _mm256_fnmadd_pd(k, pio2_3, r);
  const __m256d r2 = _mm256_mul_pd(r, r);

  // sin(r) = r * (1 - r^2/3! + ... - r^16/17!)
  __m256d s = _mm256_set1_pd(1.0 / 355687428096000.0);
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(-1.0 / 1307674368000.0));
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(1.0 / 6227020800.0));
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(-1.0 / 39916800.0));
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(1.0 / 362880.0));
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(-1.0 / 5040.0));
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(1.0 / 120.0));
  s = _mm256_fmadd_pd(s, r2, _mm256_set1_pd(-1.0 / 6.0));
  s = _mm256_mul_pd(s, r2);
  s = _mm256_fmadd_pd(s, r, r);

  // cos(r) = 1 - r^2/2! + ... + r^16/16!
  __m256d c = _mm256_set1_pd(1.0 / 20922789888000.0);
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(-1.0 / 87178291200.0));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(1.0 / 479001600.0));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(-1.0 / 3628800.0));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(1.0 / 40320.0));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(-1.0 / 720.0));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(1.0 / 24.0));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(-0.5));
  c = _mm256_fmadd_pd(c, r2, _mm256_set1_pd(1.0));

  // Quadrant q = k mod 4 from the low mantissa bits of k + 1.5 * 2^52.
  const __m256i q = _mm256_castpd_si256(_mm256_add_pd(k, _mm256_set1_pd(6755399441055744.0)));
  const __m256i one = _mm256_set1_epi64x(1);
  const __m256i two = _mm256_set1_epi64x(2);
  const __m256d swap = _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(q, one), one));
  const __m256d q_sin_neg = _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(q, two), two));
  // cos is negated in quadrants 1 and 2: bit1 xor bit0.
  const __m256i q_plus_one = _mm256_add_epi64(q, one);
  const __m256d q_cos_neg = _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(q_plus_one, two), two));

  const __m256d sign_bit = _mm256_set1_pd(-0.0);
  __m256d sin_v = _mm256_blendv_pd(s, c, swap);
  __m256d cos_v = _mm256_blendv_pd(c, s, swap);
  sin_v = _mm256_xor_pd(sin_v, _mm256_and_pd(q_sin_neg, sign_bit));
  cos_v = _mm256_xor_pd(cos_v, _mm256_and_pd(q_cos_neg, sign_bit));
  *sin_out = sin_v;
  *cos_out = cos_v;
}

inline __m256d cos_pd(__m256d x) {
  __m256d s, c;
  sincos_pd(x, &s, &c);
  return c;
}

// True when any lane is outside the range sincos_pd reduces accurately.
inline bool trig_out_of_range(__m256d x) {
  const __m256d abs_x = _mm256_andnot_pd(_mm256_set1_pd(-0.0), x);
  return _mm256_movemask_pd(_mm256_cmp_pd(abs_x, _mm256_set1_pd(1048576.0), _CMP_GE_OQ)) != 0;
}

}  // namespace gpcis::simd::avx2
