// SPDX-License-Identifier: Apache-2.0
#pragma once

// Vector primitives the IP kernels are written on. Every routine has a
// portable scalar reference and, where the build and CPU allow, an AVX2
// variant picked at runtime. The variants perform the same IEEE operations
// per element in the same order (no FMA contraction), so they agree
// bitwise with the scalar reference.

#include <cstddef>

namespace ovl::simd {

enum class Isa { kScalar, kAvx2 };

const char* to_string(Isa isa);

/// Best ISA both compiled in and supported by the running CPU.
Isa detected_isa();
/// ISA the dispatching entry points currently route to.
Isa active_isa();
/// Reroutes dispatch. Returns false (and changes nothing) if `isa` is not
/// available on this build/CPU.
bool set_active_isa(Isa isa);

// y[i] += a * x[i]
void axpy(std::size_t n, double a, const double* x, double* y);
void axpy(std::size_t n, float a, const float* x, float* y);
// y[i] *= a
void scal(std::size_t n, double a, double* y);
void scal(std::size_t n, float a, float* y);
// y[i] = y[i] > 0 ? y[i] : 0
void relu(std::size_t n, double* y);
void relu(std::size_t n, float* y);
// y[i] = x[i] > y[i] ? x[i] : y[i]
void vmax(std::size_t n, const double* x, double* y);
void vmax(std::size_t n, const float* x, float* y);

namespace scalar {
void axpy(std::size_t n, double a, const double* x, double* y);
void axpy(std::size_t n, float a, const float* x, float* y);
void scal(std::size_t n, double a, double* y);
void scal(std::size_t n, float a, float* y);
void relu(std::size_t n, double* y);
void relu(std::size_t n, float* y);
void vmax(std::size_t n, const double* x, double* y);
void vmax(std::size_t n, const float* x, float* y);
}  // namespace scalar

#if defined(OVL_HAVE_AVX2)
namespace avx2 {
void axpy(std::size_t n, double a, const double* x, double* y);
void axpy(std::size_t n, float a, const float* x, float* y);
void scal(std::size_t n, double a, double* y);
void scal(std::size_t n, float a, float* y);
void relu(std::size_t n, double* y);
void relu(std::size_t n, float* y);
void vmax(std::size_t n, const double* x, double* y);
void vmax(std::size_t n, const float* x, float* y);
}  // namespace avx2
#endif

}  // namespace ovl::simd
