/*
 * Copyright 2026 The sweepnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Compiled with -mavx2 -mfma. Keep this file free of standard-library
// inline code so no AVX2-encoded copies leak into other translation units.

#include <immintrin.h>

#include "sweepnav/simd/kernels.hpp"

namespace sweepnav::simd::avx2 {
namespace {

void rotate_xy(const double* x, const double* y, double c, double s, double* out_x,
               double* out_y, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xi = _mm256_loadu_pd(x + i);
    const __m256d yi = _mm256_loadu_pd(y + i);
    const __m256d ox = _mm256_sub_pd(_mm256_mul_pd(vc, xi), _mm256_mul_pd(vs, yi));
    const __m256d oy = _mm256_add_pd(_mm256_mul_pd(vs, xi), _mm256_mul_pd(vc, yi));
    _mm256_storeu_pd(out_x + i, ox);
    _mm256_storeu_pd(out_y + i, oy);
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    out_x[i] = c * xi - s * yi;
    out_y[i] = s * xi + c * yi;
  }
}

void dense_f32(const float* w, const float* bias, std::size_t rows, std::size_t cols,
               const float* in, float* out) {
  for (std::size_t j = 0; j < cols; ++j) out[j] = bias ? bias[j] : 0.0f;
  for (std::size_t i = 0; i < rows; ++i) {
    const float a = in[i];
    const __m256 va = _mm256_set1_ps(a);
    const float* row = w + i * cols;
    std::size_t j = 0;
    for (; j + 8 <= cols; j += 8) {
      const __m256 acc = _mm256_loadu_ps(out + j);
      const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(row + j));
      _mm256_storeu_ps(out + j, _mm256_add_ps(acc, prod));
    }
    for (; j < cols; ++j) out[j] = out[j] + a * row[j];
  }
}

void relu_f32(float* v, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(v + i, _mm256_max_ps(_mm256_loadu_ps(v + i), zero));
  for (; i < n; ++i) v[i] = v[i] > 0.0f ? v[i] : 0.0f;
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0 = accumulate ? _mm256_loadu_pd(ci + j) : _mm256_setzero_pd();
      __m256d c1 = accumulate ? _mm256_loadu_pd(ci + j + 4) : _mm256_setzero_pd();
      __m256d c2 = accumulate ? _mm256_loadu_pd(ci + j + 8) : _mm256_setzero_pd();
      __m256d c3 = accumulate ? _mm256_loadu_pd(ci + j + 12) : _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(ai + p);
        const double* bp = b + p * n + j;
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), c1);
        c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 8), c2);
        c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 12), c3);
      }
      _mm256_storeu_pd(ci + j, c0);
      _mm256_storeu_pd(ci + j + 4, c1);
      _mm256_storeu_pd(ci + j + 8, c2);
      _mm256_storeu_pd(ci + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = accumulate ? _mm256_loadu_pd(ci + j) : _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p)
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(ai + p), _mm256_loadu_pd(b + p * n + j), c0);
      _mm256_storeu_pd(ci + j, c0);
    }
    for (; j < n; ++j) {
      double acc = accumulate ? ci[j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * b[p * n + j];
      ci[j] = acc;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate)
    for (std::size_t i = 0; i < k * n; ++i) c[i] = 0.0;
  // Row chunks keep the a and b panels cache resident across the c tiles.
  constexpr std::size_t kChunk = 256;
  for (std::size_t r0 = 0; r0 < m; r0 += kChunk) {
    const std::size_t r1 = m - r0 < kChunk ? m : r0 + kChunk;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      double* c0 = c + p * n;
      double* c1 = c0 + n;
      double* c2 = c1 + n;
      double* c3 = c2 + n;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256d x0 = _mm256_loadu_pd(c0 + j), y0 = _mm256_loadu_pd(c0 + j + 4);
        __m256d x1 = _mm256_loadu_pd(c1 + j), y1 = _mm256_loadu_pd(c1 + j + 4);
        __m256d x2 = _mm256_loadu_pd(c2 + j), y2 = _mm256_loadu_pd(c2 + j + 4);
        __m256d x3 = _mm256_loadu_pd(c3 + j), y3 = _mm256_loadu_pd(c3 + j + 4);
        for (std::size_t r = r0; r < r1; ++r) {
          const double* ar = a + r * k + p;
          const __m256d b0 = _mm256_loadu_pd(b + r * n + j);
          const __m256d b1 = _mm256_loadu_pd(b + r * n + j + 4);
          __m256d av = _mm256_broadcast_sd(ar);
          x0 = _mm256_fmadd_pd(av, b0, x0);
          y0 = _mm256_fmadd_pd(av, b1, y0);
          av = _mm256_broadcast_sd(ar + 1);
          x1 = _mm256_fmadd_pd(av, b0, x1);
          y1 = _mm256_fmadd_pd(av, b1, y1);
          av = _mm256_broadcast_sd(ar + 2);
          x2 = _mm256_fmadd_pd(av, b0, x2);
          y2 = _mm256_fmadd_pd(av, b1, y2);
          av = _mm256_broadcast_sd(ar + 3);
          x3 = _mm256_fmadd_pd(av, b0, x3);
          y3 = _mm256_fmadd_pd(av, b1, y3);
        }
        _mm256_storeu_pd(c0 + j, x0);
        _mm256_storeu_pd(c0 + j + 4, y0);
        _mm256_storeu_pd(c1 + j, x1);
        _mm256_storeu_pd(c1 + j + 4, y1);
        _mm256_storeu_pd(c2 + j, x2);
        _mm256_storeu_pd(c2 + j + 4, y2);
        _mm256_storeu_pd(c3 + j, x3);
        _mm256_storeu_pd(c3 + j + 4, y3);
      }
      // Narrow tails vectorise over the four c rows instead.
      for (; j < n; ++j) {
        __m256d acc = _mm256_set_pd(c3[j], c2[j], c1[j], c0[j]);
        for (std::size_t r = r0; r < r1; ++r)
          acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + r * k + p), _mm256_broadcast_sd(b + r * n + j), acc);
        alignas(32) double out[4];
        _mm256_store_pd(out, acc);
        c0[j] = out[0];
        c1[j] = out[1];
        c2[j] = out[2];
        c3[j] = out[3];
      }
    }
    for (; p < k; ++p)
      for (std::size_t r = r0; r < r1; ++r) {
        const double ap = a[r * k + p];
        for (std::size_t j = 0; j < n; ++j) c[p * n + j] += ap * b[r * n + j];
      }
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k, bool accumulate) {
  // Small right-hand sides are transposed once and fed to the nn kernel.
  constexpr std::size_t kMaxTransposed = 4096;
  if (k >= 4 && n * k <= kMaxTransposed) {
    double bt[kMaxTransposed];
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    gemm_nn(a, bt, c, m, n, k, accumulate);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      __m256d acc = _mm256_setzero_pd();
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + j), _mm256_loadu_pd(bp + j), acc);
      double sum = hsum(acc);
      for (; j < n; ++j) sum += ai[j] * bp[j];
      c[i * k + p] = accumulate ? c[i * k + p] + sum : sum;
    }
  }
}

}  // namespace

const KernelTable kTable{rotate_xy, dense_f32, relu_f32, gemm_nn, gemm_tn, gemm_nt};

}  // namespace sweepnav::simd::avx2
