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

#ifndef SWEEPNAV_SIMD_KERNELS_HPP_
#define SWEEPNAV_SIMD_KERNELS_HPP_

// Data-parallel inner loops used by the estimator, the RAE rotations and the
// loop-closure correction network. Every kernel has a scalar reference
// implementation and an AVX2 variant; the active variant is chosen once at
// startup from CPUID and can be pinned with set_isa().
//
// Matrices are dense row-major. The float32 kernels and rotate_xy avoid fused
// multiply-add so both variants produce identical bits; the float64 GEMM
// kernels use FMA on AVX2 and agree with the scalar path to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace sweepnav::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);
// Parses "scalar", "avx2" or "auto" (best supported).
Isa parse_isa(std::string_view name);

// Best variant this CPU supports.
Isa detected_isa();
Isa active_isa();
// Throws ValidationError when the CPU lacks the requested extension. Not
// meant to be toggled while kernels are running on other threads.
void set_isa(Isa isa);

struct KernelTable {
  // out_x = c*x - s*y, out_y = s*x + c*y.
  void (*rotate_xy)(const double* x, const double* y, double c, double s,
                    double* out_x, double* out_y, std::size_t n);
  // out[cols] = bias + in[rows] * w[rows x cols]; bias may be null.
  void (*dense_f32)(const float* w, const float* bias, std::size_t rows,
                    std::size_t cols, const float* in, float* out);
  void (*relu_f32)(float* v, std::size_t n);
  // c[m x n] (+)= a[m x k] * b[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate);
  // c[k x n] (+)= a[m x k]^T * b[m x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate);
  // c[m x k] (+)= a[m x n] * b[k x n]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t k, bool accumulate);
};

const KernelTable& kernels();
const KernelTable& kernels(Isa isa);

namespace scalar {
extern const KernelTable kTable;
}
namespace avx2 {
// Only safe to call through when detected_isa() == Isa::kAvx2.
extern const KernelTable kTable;
}

// Span conveniences over the active table.
void rotate_xy(std::span<const double> x, std::span<const double> y, double theta,
               std::span<double> out_x, std::span<double> out_y);

}  // namespace sweepnav::simd

#endif  // SWEEPNAV_SIMD_KERNELS_HPP_
