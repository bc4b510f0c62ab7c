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

#include <atomic>
#include <cmath>
#include <string>

#include "sweepnav/common.hpp"
#include "sweepnav/simd/kernels.hpp"

namespace sweepnav::simd {
namespace {

Isa probe() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::kAvx2;
#endif
  return Isa::kScalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  if (name == "auto") return detected_isa();
  throw ValidationError("unknown SIMD variant '" + std::string(name) +
                        "' (expected scalar, avx2 or auto)");
}

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::kAvx2 && detected_isa() != Isa::kAvx2)
    throw ValidationError("this CPU does not support AVX2+FMA");
  active().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels(Isa isa) {
  return isa == Isa::kAvx2 ? avx2::kTable : scalar::kTable;
}

const KernelTable& kernels() { return kernels(active_isa()); }

void rotate_xy(std::span<const double> x, std::span<const double> y, double theta,
               std::span<double> out_x, std::span<double> out_y) {
  if (y.size() != x.size() || out_x.size() < x.size() || out_y.size() < x.size())
    throw ValidationError("rotate_xy: span length mismatch");
  kernels().rotate_xy(x.data(), y.data(), std::cos(theta), std::sin(theta), out_x.data(),
                      out_y.data(), x.size());
}

}  // namespace sweepnav::simd
