// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <cstring>

#include "ovl/simd.hpp"

namespace ovl::simd {

namespace {

struct Table {
  void (*axpy_d)(std::size_t, double, const double*, double*);
  void (*axpy_f)(std::size_t, float, const float*, float*);
  void (*scal_d)(std::size_t, double, double*);
  void (*scal_f)(std::size_t, float, float*);
  void (*relu_d)(std::size_t, double*);
  void (*relu_f)(std::size_t, float*);
  void (*vmax_d)(std::size_t, const double*, double*);
  void (*vmax_f)(std::size_t, const float*, float*);
};

constexpr Table kScalar{scalar::axpy, scalar::axpy, scalar::scal, scalar::scal,
                        scalar::relu, scalar::relu, scalar::vmax, scalar::vmax};
#if defined(OVL_HAVE_AVX2)
constexpr Table kAvx2{avx2::axpy, avx2::axpy, avx2::scal, avx2::scal,
                      avx2::relu, avx2::relu, avx2::vmax, avx2::vmax};
#endif

bool cpu_has_avx2() {
#if defined(OVL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Table* table_for(Isa isa) {
#if defined(OVL_HAVE_AVX2)
  if (isa == Isa::kAvx2) return &kAvx2;
#endif
  (void)isa;
  return &kScalar;
}

// OVL_SIMD=scalar pins the reference path for a whole process.
Isa initial_isa() {
  const char* env = std::getenv("OVL_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return Isa::kScalar;
  return detected_isa();
}

std::atomic<const Table*>& active_table() {
  static std::atomic<const Table*> table{table_for(initial_isa())};
  return table;
}

const Table& t() { return *active_table().load(std::memory_order_relaxed); }

}  // namespace

const char* to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

Isa detected_isa() { return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar; }

Isa active_isa() {
#if defined(OVL_HAVE_AVX2)
  if (&t() == &kAvx2) return Isa::kAvx2;
#endif
  return Isa::kScalar;
}

bool set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !cpu_has_avx2()) return false;
  active_table().store(table_for(isa), std::memory_order_relaxed);
  return true;
}

void axpy(std::size_t n, double a, const double* x, double* y) { t().axpy_d(n, a, x, y); }
void axpy(std::size_t n, float a, const float* x, float* y) { t().axpy_f(n, a, x, y); }
void scal(std::size_t n, double a, double* y) { t().scal_d(n, a, y); }
void scal(std::size_t n, float a, float* y) { t().scal_f(n, a, y); }
void relu(std::size_t n, double* y) { t().relu_d(n, y); }
void relu(std::size_t n, float* y) { t().relu_f(n, y); }
void vmax(std::size_t n, const double* x, double* y) { t().vmax_d(n, x, y); }
void vmax(std::size_t n, const float* x, float* y) { t().vmax_f(n, x, y); }

}  // namespace ovl::simd
